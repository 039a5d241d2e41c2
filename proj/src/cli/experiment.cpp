// SPDX-License-Identifier: Apache-2.0
#include "isac/cli/experiment.hpp"

#include <fstream>
#include <set>

#include "isac/errors.hpp"

namespace isac::cli {

using nlohmann::json;

namespace {

// Reads fields out of one JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  ~Fields() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json scenario_json(const channel::ScenarioConfig& s) {
  return {{"grid", {{"k", s.grid.k}, {"subcarrier_spacing", s.grid.subcarrier_spacing}, {"carrier", s.grid.carrier}}},
          {"n_v", s.n_v},
          {"n_h", s.n_h},
          {"n_shared", s.n_shared},
          {"n_comm", s.n_comm},
          {"n_sense", s.n_sense},
          {"speed_min_kmh", s.speed_min_kmh},
          {"speed_max_kmh", s.speed_max_kmh},
          {"scatterer_speed_max", s.scatterer_speed_max},
          {"rho", s.rho},
          {"delay_spread_fraction", s.delay_spread_fraction},
          {"pdp_decay_fraction", s.pdp_decay_fraction},
          {"los", s.los},
          {"los_power_ratio", s.los_power_ratio},
          {"slot_duration", s.slot_duration},
          {"power_total", s.power_total}};
}

void read_scenario(const json& j, channel::ScenarioConfig& s) {
  Fields f(j, "scenario");
  if (const json* g = f.child("grid")) {
    Fields fg(*g, "scenario.grid");
    fg.get("k", s.grid.k);
    fg.get("subcarrier_spacing", s.grid.subcarrier_spacing);
    fg.get("carrier", s.grid.carrier);
  }
  f.get("n_v", s.n_v);
  f.get("n_h", s.n_h);
  f.get("n_shared", s.n_shared);
  f.get("n_comm", s.n_comm);
  f.get("n_sense", s.n_sense);
  f.get("speed_min_kmh", s.speed_min_kmh);
  f.get("speed_max_kmh", s.speed_max_kmh);
  f.get("scatterer_speed_max", s.scatterer_speed_max);
  f.get("rho", s.rho);
  f.get("delay_spread_fraction", s.delay_spread_fraction);
  f.get("pdp_decay_fraction", s.pdp_decay_fraction);
  f.get("los", s.los);
  f.get("los_power_ratio", s.los_power_ratio);
  f.get("slot_duration", s.slot_duration);
  f.get("power_total", s.power_total);
}

json model_json(const model::ModelConfig& m) {
  return {{"features", m.features},
          {"layers", m.layers},
          {"heads", m.heads},
          {"hidden_channels", m.hidden_channels},
          {"sense_depth", m.sense_depth},
          {"comm_depth", m.comm_depth},
          {"kernel", m.kernel},
          {"fusion_heads", m.fusion_heads},
          {"fusion_mode", model::to_string(m.fusion_mode)},
          {"causal", m.causal},
          {"use_sensing", m.use_sensing},
          {"use_channel_attention", m.use_channel_attention},
          {"use_cross_attention", m.use_cross_attention},
          {"use_backbone", m.use_backbone}};
}

void read_model(const json& j, model::ModelConfig& m) {
  Fields f(j, "model");
  f.get("features", m.features);
  f.get("layers", m.layers);
  f.get("heads", m.heads);
  f.get("hidden_channels", m.hidden_channels);
  f.get("sense_depth", m.sense_depth);
  f.get("comm_depth", m.comm_depth);
  f.get("kernel", m.kernel);
  f.get("fusion_heads", m.fusion_heads);
  std::string mode = model::to_string(m.fusion_mode);
  f.get("fusion_mode", mode);
  m.fusion_mode = model::fusion_mode_from_string(mode);
  f.get("causal", m.causal);
  f.get("use_sensing", m.use_sensing);
  f.get("use_channel_attention", m.use_channel_attention);
  f.get("use_cross_attention", m.use_cross_attention);
  f.get("use_backbone", m.use_backbone);
}

json train_json(const train::TrainConfig& t) {
  json j = {{"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"lr", t.lr},
            {"min_lr", t.min_lr},
            {"freeze_policy", train::to_string(t.freeze_policy)},
            {"patience", t.patience},
            {"max_steps", t.max_steps},
            {"chunk_rows", t.chunk_rows},
            {"adam", {{"beta1", t.adam.beta1}, {"beta2", t.adam.beta2}, {"eps", t.adam.eps}}}};
  j["snr_train_range_db"] = t.snr_train_range_db ? json(*t.snr_train_range_db) : json(nullptr);
  return j;
}

void read_train(const json& j, train::TrainConfig& t) {
  Fields f(j, "train");
  f.get("epochs", t.epochs);
  f.get("batch_size", t.batch_size);
  f.get("lr", t.lr);
  f.get("min_lr", t.min_lr);
  std::string policy = train::to_string(t.freeze_policy);
  f.get("freeze_policy", policy);
  t.freeze_policy = train::freeze_policy_from_string(policy);
  f.get("patience", t.patience);
  f.get("max_steps", t.max_steps);
  f.get("chunk_rows", t.chunk_rows);
  if (const json* a = f.child("adam")) {
    Fields fa(*a, "train.adam");
    fa.get("beta1", t.adam.beta1);
    fa.get("beta2", t.adam.beta2);
    fa.get("eps", t.adam.eps);
  }
  if (const json* snr = f.child("snr_train_range_db")) {
    if (snr->is_null()) {
      t.snr_train_range_db.reset();
    } else {
      try {
        t.snr_train_range_db = snr->get<std::array<double, 2>>();
      } catch (const json::exception& e) {
        throw ConfigError(std::string("train.snr_train_range_db: ") + e.what());
      }
    }
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::desk() {
  ExperimentConfig c;
  c.data.scenario.grid.k = 16;
  c.data.scenario.n_v = 2;
  c.data.scenario.n_h = 2;
  return c;
}

ExperimentConfig ExperimentConfig::paper() {
  ExperimentConfig c;
  c.name = "paper";
  c.data.scenario.grid.k = 48;
  c.data.scenario.n_v = 4;
  c.data.scenario.n_h = 8;
  c.train_count = 6000;
  c.test_count = 600;
  c.model.features = 768;
  c.model.layers = 12;
  c.model.heads = 12;
  c.output_dir = "runs/paper";
  return c;
}

model::ModelConfig ExperimentConfig::resolved_model() const {
  model::ModelConfig m = model;
  m.k = data.scenario.grid.k;
  m.p = data.p;
  m.q = data.q;
  return m;
}

void ExperimentConfig::validate() const {
  data.validate();
  resolved_model().validate();
  train.validate();
  if (train_count < 1 || test_count < 1) throw ConfigError("train_count and test_count must be at least 1");
  if (val_fraction < 0.0 || val_fraction >= 1.0) throw ConfigError("val_fraction must be in [0, 1)");
  if (repeats < 1) throw ConfigError("repeats must be at least 1");
  if (!(eval.speed_bin_width > 0.0) || eval.speed_max <= eval.speed_min) {
    throw ConfigError("speed bins need width > 0 and speed_max > speed_min");
  }
  if (eval.batch_size < 1) throw ConfigError("eval.batch_size must be at least 1");
  if (schemes.empty()) throw ConfigError("schemes must not be empty");
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["scenario"] = scenario_json(c.data.scenario);
  j["dataset"] = {{"p", c.data.p}, {"q", c.data.q}, {"train_count", c.train_count}, {"test_count", c.test_count},
                  {"val_fraction", c.val_fraction}};
  j["model"] = model_json(c.model);
  j["baseline"] = {{"hidden", c.baseline.hidden},
                   {"layers", c.baseline.layers},
                   {"heads", c.baseline.heads},
                   {"kernel", c.baseline.kernel}};
  j["train"] = train_json(c.train);
  j["schemes"] = c.schemes;
  j["repeats"] = c.repeats;
  j["eval"] = {{"batch_size", c.eval.batch_size},   {"speed_bin_width", c.eval.speed_bin_width},
               {"speed_min", c.eval.speed_min},     {"speed_max", c.eval.speed_max},
               {"snr_db", c.eval.snr_db},           {"svg", c.eval.svg}};
  j["output_dir"] = c.output_dir.string();
  return j;
}

ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig c = ExperimentConfig::desk();
  {
    Fields f(j, "config");
    f.get("name", c.name);
    f.get("seed", c.seed);
    if (const json* s = f.child("scenario")) read_scenario(*s, c.data.scenario);
    if (const json* d = f.child("dataset")) {
      Fields fd(*d, "dataset");
      fd.get("p", c.data.p);
      fd.get("q", c.data.q);
      fd.get("train_count", c.train_count);
      fd.get("test_count", c.test_count);
      fd.get("val_fraction", c.val_fraction);
    }
    if (const json* m = f.child("model")) read_model(*m, c.model);
    if (const json* b = f.child("baseline")) {
      Fields fb(*b, "baseline");
      fb.get("hidden", c.baseline.hidden);
      fb.get("layers", c.baseline.layers);
      fb.get("heads", c.baseline.heads);
      fb.get("kernel", c.baseline.kernel);
    }
    if (const json* t = f.child("train")) read_train(*t, c.train);
    f.get("schemes", c.schemes);
    f.get("repeats", c.repeats);
    if (const json* e = f.child("eval")) {
      Fields fe(*e, "eval");
      fe.get("batch_size", c.eval.batch_size);
      fe.get("speed_bin_width", c.eval.speed_bin_width);
      fe.get("speed_min", c.eval.speed_min);
      fe.get("speed_max", c.eval.speed_max);
      fe.get("snr_db", c.eval.snr_db);
      fe.get("svg", c.eval.svg);
    }
    std::string out = c.output_dir.string();
    f.get("output_dir", out);
    c.output_dir = out;
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return experiment_from_json(j);
}

std::string dump_experiment(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

}  // namespace isac::cli
