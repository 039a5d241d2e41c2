// SPDX-License-Identifier: Apache-2.0
#include "isac/cli/commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "isac/baselines/baselines.hpp"
#include "isac/errors.hpp"
#include "isac/model/isac_model.hpp"
#include "isac/numerics/random.hpp"

namespace isac::cli {

namespace fs = std::filesystem;
using num::derive_seed;

namespace {

// Seed streams hanging off the experiment seed.
constexpr std::uint64_t kTrainDataStream = 11;
constexpr std::uint64_t kTestDataStream = 12;
constexpr std::uint64_t kInitStream = 22;
constexpr std::uint64_t kSnrNoiseStream = 31;

constexpr const char* kNoSense = "_nosense";

bool ends_with(const std::string& s, const std::string& tail) {
  return s.size() >= tail.size() && s.compare(s.size() - tail.size(), tail.size(), tail) == 0;
}

std::string number_label(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Everything the generated data depends on; a mismatch means the files are stale.
std::string data_fingerprint(const ExperimentConfig& c) {
  nlohmann::json j = to_json(c);
  nlohmann::json f;
  f["seed"] = j["seed"];
  f["scenario"] = j["scenario"];
  f["p"] = c.data.p;
  f["q"] = c.data.q;
  f["train_count"] = c.train_count;
  f["test_count"] = c.test_count;
  return f.dump(2) + "\n";
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

fs::path model_dir(const ExperimentConfig& c, const std::string& scheme) { return c.output_dir / "models" / scheme; }

train::TrainReport train_scheme(const ExperimentConfig& config, const std::string& scheme, const Datasets& data,
                                std::uint64_t seed, const fs::path& dir, std::ostream& log) {
  const auto predictor = make_predictor(scheme, config);
  auto [train_set, val_set] = train::split_validation(data.train, config.val_fraction);
  train::TrainConfig tc = config.train;
  tc.seed = seed;
  log << "training " << scheme << " (seed " << seed << ", " << train_set.size() << " train / " << val_set.size()
      << " val windows)" << std::endl;
  // Old checkpoints from a previous run must not survive a run that never improves on them.
  fs::remove(dir / "best.ntar");
  fs::remove(dir / "best.json");
  auto result = train::train(*predictor, predictor->init_params(derive_seed(seed, kInitStream)), train_set, val_set, tc, dir);
  write_text(dir / "report.json", train::report_json(result.report) + "\n");
  log << "  " << scheme << ": best val NMSE " << result.report.best_val << " at epoch " << result.report.best_epoch
      << ", " << result.report.steps << " steps, " << result.report.wall_seconds << " s" << std::endl;
  return result.report;
}

ResultRow score_row(const std::string& scheme, const std::string& bin, const train::Score& s, std::uint64_t seed) {
  return {scheme, bin, s.nmse_global, s.nmse_mean, s.n, seed};
}

std::vector<train::SampleError> test_errors(const ExperimentConfig& config, const std::string& scheme,
                                            const fs::path& stem, const channel::Dataset& test, double snr_db,
                                            std::uint64_t noise_seed) {
  const auto predictor = make_predictor(scheme, config);
  const auto params = load_trained(*predictor, stem);
  return train::evaluate(*predictor, params, test.samples, snr_db, noise_seed, config.eval.batch_size);
}

void write_table(const ExperimentConfig& config, const std::string& stem, const ResultTable& table,
                 const std::string& title, const std::string& x_label, std::ostream& log) {
  write_text(config.output_dir / (stem + ".csv"), table.to_csv());
  if (config.eval.svg && !x_label.empty()) write_text(config.output_dir / (stem + ".svg"), table.to_svg(title, x_label));
  log << "wrote " << (config.output_dir / (stem + ".csv")).string() << std::endl;
}

}  // namespace

std::unique_ptr<model::Predictor> make_predictor(const std::string& scheme, const ExperimentConfig& config) {
  model::ModelConfig m = config.resolved_model();
  if (scheme == "proposed") return std::make_unique<model::IsacModel>(m);
  if (scheme == "proposed_nosense") {
    m.use_sensing = false;
    return std::make_unique<model::IsacModel>(m);
  }
  if (scheme == "proposed_no_channel_attention") {
    m.use_channel_attention = false;
    return std::make_unique<model::IsacModel>(m);
  }
  if (scheme == "proposed_no_cross_attention") {
    m.use_cross_attention = false;
    return std::make_unique<model::IsacModel>(m);
  }
  if (scheme == "proposed_no_backbone") {
    m.use_backbone = false;
    return std::make_unique<model::IsacModel>(m);
  }

  baselines::BaselineConfig b = config.baseline;
  std::string kind = scheme;
  if (ends_with(kind, kNoSense)) {
    kind.resize(kind.size() - std::string(kNoSense).size());
    b.use_sensing = false;
  }
  b.kind = baselines::kind_from_string(kind);
  b.k = m.k;
  b.p = m.p;
  b.q = m.q;
  if (b.hidden == 0) {
    b.hidden = 1;
    b = baselines::size_to_budget(b, trainable_budget(config));
  }
  b.validate();
  return std::make_unique<baselines::Baseline>(b);
}

std::size_t trainable_budget(const ExperimentConfig& config) {
  model::IsacModel m(config.resolved_model());
  auto params = m.init_params(0);
  train::apply_freeze_policy(params, config.train.freeze_policy);
  return params.count(true);
}

const std::vector<AblationVariant>& ablation_variants() {
  static const std::vector<AblationVariant> variants{
      {"proposed", "Our approach"},
      {"proposed_nosense", "W/o sensing"},
      {"proposed_no_channel_attention", "W/o channel attention"},
      {"proposed_no_cross_attention", "W/o cross attention"},
      {"proposed_no_backbone", "W/o LLM"},
  };
  return variants;
}

std::string speed_bin(const EvalConfig& eval, double speed_kmh) {
  if (speed_kmh < eval.speed_min || speed_kmh > eval.speed_max) return {};
  const auto bins = static_cast<std::size_t>(std::ceil((eval.speed_max - eval.speed_min) / eval.speed_bin_width - 1e-9));
  auto i = static_cast<std::size_t>(std::floor((speed_kmh - eval.speed_min) / eval.speed_bin_width));
  if (i >= bins) i = bins - 1;  // speed_max itself belongs to the last bin
  const double lo = eval.speed_min + eval.speed_bin_width * static_cast<double>(i);
  const double hi = std::min(eval.speed_max, lo + eval.speed_bin_width);
  return number_label(lo) + "-" + number_label(hi);
}

Datasets load_or_generate(const ExperimentConfig& config, std::ostream& log) {
  const fs::path train_path = config.output_dir / "train.isac";
  const fs::path test_path = config.output_dir / "test.isac";
  const fs::path stamp = config.output_dir / "data.json";
  const std::string fingerprint = data_fingerprint(config);
  if (fs::exists(train_path) && fs::exists(test_path) && read_text(stamp) == fingerprint) {
    return {channel::read_dataset(train_path), channel::read_dataset(test_path)};
  }
  const auto start = std::chrono::steady_clock::now();
  Datasets d{channel::generate_dataset(config.data, config.train_count, derive_seed(config.seed, kTrainDataStream)),
             channel::generate_dataset(config.data, config.test_count, derive_seed(config.seed, kTestDataStream))};
  channel::write_dataset(train_path, d.train);
  channel::write_dataset(test_path, d.test);
  write_text(stamp, fingerprint);
  log << "generated " << d.train.size() << " train and " << d.test.size() << " test windows in " << seconds_since(start)
      << " s" << std::endl;
  return d;
}

void echo_config(const ExperimentConfig& config) { write_text(config.output_dir / "config.json", dump_experiment(config)); }

void cmd_generate(const ExperimentConfig& config, std::ostream& log) {
  echo_config(config);
  load_or_generate(config, log);
}

std::vector<train::TrainReport> cmd_train(const ExperimentConfig& config, std::ostream& log) {
  echo_config(config);
  const Datasets data = load_or_generate(config, log);
  std::vector<train::TrainReport> reports;
  for (const auto& scheme : config.schemes) {
    reports.push_back(train_scheme(config, scheme, data, config.seed, model_dir(config, scheme), log));
  }
  return reports;
}

num::ParamStore<float> load_trained(const model::Predictor& predictor, const fs::path& stem) {
  fs::path file = stem;
  file += ".ntar";
  if (!fs::exists(file)) throw IoError("no trained checkpoint at " + file.string() + "; run train first");
  auto params = predictor.init_params(0).cast<float>();
  train::load_checkpoint(stem, params);
  return params;
}

ResultTable cmd_eval(const ExperimentConfig& config, std::ostream& log) {
  echo_config(config);
  const Datasets data = load_or_generate(config, log);
  ResultTable table;
  for (const auto& scheme : config.schemes) {
    const auto errors = test_errors(config, scheme, model_dir(config, scheme) / "best", data.test, prep::kNoNoise, 0);
    table.rows.push_back(score_row(scheme, "test", train::summarize(errors), config.seed));
    log << scheme << ": test NMSE " << table.rows.back().nmse_global << std::endl;
  }
  write_table(config, "eval", table, "", "", log);
  return table;
}

ResultTable cmd_sweep_speed(const ExperimentConfig& config, std::ostream& log) {
  echo_config(config);
  const Datasets data = load_or_generate(config, log);

  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> members;
  for (double lo = config.eval.speed_min; lo < config.eval.speed_max - 1e-9; lo += config.eval.speed_bin_width) {
    labels.push_back(speed_bin(config.eval, lo));
    members.emplace_back();
  }
  std::size_t outside = 0;
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    const std::string bin = speed_bin(config.eval, data.test.samples[i].speed_kmh);
    const auto it = std::find(labels.begin(), labels.end(), bin);
    if (it == labels.end()) {
      ++outside;
      continue;
    }
    members[static_cast<std::size_t>(it - labels.begin())].push_back(i);
  }
  if (outside) log << "warning: " << outside << " test windows lie outside the speed bins" << std::endl;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (members[b].empty()) log << "warning: speed bin " << labels[b] << " km/h has no test windows, skipped" << std::endl;
  }

  ResultTable table;
  for (const auto& scheme : config.schemes) {
    const auto errors = test_errors(config, scheme, model_dir(config, scheme) / "best", data.test, prep::kNoNoise, 0);
    for (std::size_t b = 0; b < labels.size(); ++b) {
      if (members[b].empty()) continue;
      std::vector<train::SampleError> subset;
      for (std::size_t i : members[b]) subset.push_back(errors[i]);
      table.rows.push_back(score_row(scheme, labels[b], train::summarize(subset), config.seed));
    }
  }
  write_table(config, "speed", table, "NMSE vs. UE speed", "speed (km/h)", log);
  return table;
}

ResultTable cmd_sweep_snr(const ExperimentConfig& config, std::ostream& log) {
  echo_config(config);
  const Datasets data = load_or_generate(config, log);
  // One noise seed for every SNR point, so the curves differ only by noise power.
  const std::uint64_t noise_seed = derive_seed(config.seed, kSnrNoiseStream);
  ResultTable table;
  for (const auto& scheme : config.schemes) {
    const auto predictor = make_predictor(scheme, config);
    const auto params = load_trained(*predictor, model_dir(config, scheme) / "best");
    auto run = [&](double snr) {
      return train::summarize(
          train::evaluate(*predictor, params, data.test.samples, snr, noise_seed, config.eval.batch_size));
    };
    table.rows.push_back(score_row(scheme, "clean", run(prep::kNoNoise), config.seed));
    for (double snr : config.eval.snr_db) {
      table.rows.push_back(score_row(scheme, number_label(snr), run(snr), config.seed));
    }
    log << scheme << ": SNR sweep done" << std::endl;
  }
  write_table(config, "snr", table, "NMSE vs. SNR of historical CSI", "SNR (dB)", log);
  return table;
}

ResultTable cmd_ablate(const ExperimentConfig& config, std::ostream& log, std::vector<train::TrainReport>* reports) {
  echo_config(config);
  const Datasets data = load_or_generate(config, log);
  const auto& variants = ablation_variants();
  ResultTable table;
  std::vector<train::Score> sums(variants.size());
  for (std::size_t r = 0; r < config.repeats; ++r) {
    const std::uint64_t seed = config.seed + r;
    for (std::size_t v = 0; v < variants.size(); ++v) {
      const fs::path dir = config.output_dir / "ablation" / variants[v].scheme / ("seed" + std::to_string(seed));
      auto report = train_scheme(config, variants[v].scheme, data, seed, dir, log);
      if (reports) reports->push_back(std::move(report));
      const auto score = train::summarize(test_errors(config, variants[v].scheme, dir / "best", data.test, prep::kNoNoise, 0));
      table.rows.push_back(score_row(variants[v].label, "test", score, seed));
      sums[v].nmse_global += score.nmse_global;
      sums[v].nmse_mean += score.nmse_mean;
      sums[v].n = score.n;
    }
  }
  const double n = static_cast<double>(config.repeats);
  for (std::size_t v = 0; v < variants.size(); ++v) {
    train::Score mean{sums[v].nmse_global / n, sums[v].nmse_mean / n, sums[v].n};
    table.rows.push_back(score_row(variants[v].label, "mean", mean, config.seed));
    log << variants[v].label << ": mean test NMSE " << mean.nmse_global << " over " << config.repeats << " seeds"
        << std::endl;
  }
  write_table(config, "ablation", table, "", "", log);
  return table;
}

}  // namespace isac::cli
