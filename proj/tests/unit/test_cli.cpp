// SPDX-License-Identifier: Apache-2.0
#include <chrono>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "isac/cli/commands.hpp"
#include "isac/errors.hpp"

using namespace isac;
using namespace isac::cli;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(const std::string& dir_name) {
  ExperimentConfig c;
  c.name = "tiny";
  c.data.scenario.grid.k = 8;
  c.data.scenario.n_v = 1;
  c.data.scenario.n_h = 2;
  c.data.p = 4;
  c.data.q = 2;
  c.train_count = 12;
  c.test_count = 8;
  c.val_fraction = 0.25;
  c.model.features = 16;
  c.model.layers = 1;
  c.model.heads = 2;
  c.model.hidden_channels = 4;
  c.model.sense_depth = 1;
  c.model.comm_depth = 1;
  c.model.fusion_heads = 2;
  c.baseline.hidden = 8;
  c.baseline.layers = 1;
  c.baseline.heads = 2;
  c.train.epochs = 2;
  c.train.batch_size = 4;
  c.repeats = 1;
  c.schemes = {"proposed", "lstm"};
  c.eval.batch_size = 4;
  c.eval.snr_db = {0, 20};
  c.output_dir = fs::temp_directory_path() / ("isac_cli_" + dir_name);
  fs::remove_all(c.output_dir);
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("experiment config survives a JSON round trip") {
  for (const auto& c : {ExperimentConfig::desk(), ExperimentConfig::paper(), tiny("json")}) {
    const auto back = experiment_from_json(to_json(c));
    CHECK(dump_experiment(back) == dump_experiment(c));
  }
}

TEST_CASE("experiment config rejects unknown keys and bad values") {
  auto j = to_json(ExperimentConfig::desk());
  j["lerning_rate"] = 0.1;
  CHECK_THROWS_AS(experiment_from_json(j), ConfigError);

  j = to_json(ExperimentConfig::desk());
  j["train"]["adam"]["beta3"] = 0.5;
  CHECK_THROWS_AS(experiment_from_json(j), ConfigError);

  j = to_json(ExperimentConfig::desk());
  j["repeats"] = 0;
  CHECK_THROWS_AS(experiment_from_json(j), ConfigError);

  j = to_json(ExperimentConfig::desk());
  j["train"]["epochs"] = "many";
  CHECK_THROWS_AS(experiment_from_json(j), ConfigError);

  j = to_json(ExperimentConfig::desk());
  j["train"]["freeze_policy"] = "some";
  CHECK_THROWS_AS(experiment_from_json(j), ConfigError);

  const auto empty = experiment_from_json(nlohmann::json::object());
  CHECK(dump_experiment(empty) == dump_experiment(ExperimentConfig::desk()));
}

TEST_CASE("result table CSV round trip is exact") {
  ResultTable t;
  t.rows.push_back({"proposed", "10-20", 0.1, 1.0 / 3.0, 60, 1});
  t.rows.push_back({"W/o LLM", "mean", 1e-300, std::numeric_limits<double>::max(), 0, ~0ULL});
  t.rows.push_back({"lstm", "clean", 0.123456789012345678, 5e-324, 7, 42});
  CHECK(ResultTable::parse_csv(t.to_csv()) == t);

  CHECK_THROWS_AS(ResultTable::parse_csv("a,b\n"), UsageError);
  CHECK_THROWS_AS(ResultTable::parse_csv("scheme,bin,nmse_global,nmse_mean,n,seed\nx,y,0.1,zz,1,1\n"), UsageError);
  CHECK_THROWS_AS(ResultTable::parse_csv("scheme,bin,nmse_global,nmse_mean,n,seed\nx,y,0.1\n"), UsageError);
  ResultTable bad;
  bad.rows.push_back({"a,b", "x", 0, 0, 0, 0});
  CHECK_THROWS_AS(bad.to_csv(), UsageError);
}

TEST_CASE("svg chart lists every scheme") {
  ResultTable t;
  t.rows.push_back({"a", "0", 0.5, 0.5, 1, 1});
  t.rows.push_back({"a", "5", 0.1, 0.1, 1, 1});
  t.rows.push_back({"b<c", "0", 0.01, 0.01, 1, 1});
  const auto svg = t.to_svg("title", "x");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("b&lt;c") != std::string::npos);
}

TEST_CASE("speed bins are half-open with the top edge in the last bin") {
  EvalConfig e;
  CHECK(speed_bin(e, 10.0) == "10-20");
  CHECK(speed_bin(e, 19.999) == "10-20");
  CHECK(speed_bin(e, 20.0) == "20-30");
  CHECK(speed_bin(e, 100.0) == "90-100");
  CHECK(speed_bin(e, 9.99).empty());
  CHECK(speed_bin(e, 100.01).empty());
  e.speed_bin_width = 25;
  CHECK(speed_bin(e, 99.0) == "85-100");
}

TEST_CASE("predictor factory covers every scheme") {
  const auto c = tiny("factory");
  for (const char* s : {"proposed", "proposed_nosense", "proposed_no_channel_attention", "proposed_no_cross_attention",
                        "proposed_no_backbone", "lstm", "transformer", "cnn", "lstm_nosense", "transformer_nosense",
                        "cnn_nosense"}) {
    const auto p = make_predictor(s, c);
    CHECK(p->k() == 8);
    CHECK(p->p() == 4);
    CHECK(p->q() == 2);
  }
  CHECK(make_predictor("cnn_nosense", c)->name() == "cnn_nosense");
  CHECK_THROWS_AS(make_predictor("gru", c), ConfigError);
  CHECK_THROWS_AS(make_predictor("proposed_nothing", c), ConfigError);
}

TEST_CASE("auto-sized baselines land near the main model's trainable budget") {
  auto c = tiny("budget");
  c.baseline.hidden = 0;
  const double budget = static_cast<double>(trainable_budget(c));
  for (const char* s : {"lstm", "transformer", "cnn"}) {
    const auto p = make_predictor(s, c);
    const double n = static_cast<double>(p->init_params(0).count(true));
    CHECK(std::abs(n - budget) / budget < 0.25);
  }
}

TEST_CASE("ablation variants are the full model and four removals") {
  const auto& v = ablation_variants();
  REQUIRE(v.size() == 5);
  CHECK(v[0].label == "Our approach");
  CHECK(v[1].label == "W/o sensing");
  CHECK(v[2].label == "W/o channel attention");
  CHECK(v[3].label == "W/o cross attention");
  CHECK(v[4].label == "W/o LLM");
}

TEST_CASE("generate writes datasets with the configured window sizes and reuses them") {
  auto c = tiny("generate");
  std::ostringstream log;
  cmd_generate(c, log);
  const auto train = channel::read_dataset(c.output_dir / "train.isac");
  CHECK(train.header.p == 4);
  CHECK(train.header.q == 2);
  CHECK(train.header.k == 8);
  CHECK(train.header.n == 2);
  CHECK(train.size() == 12);
  CHECK(channel::read_dataset(c.output_dir / "test.isac").size() == 8);
  CHECK(fs::exists(c.output_dir / "config.json"));
  CHECK(dump_experiment(load_experiment(c.output_dir / "config.json")) == dump_experiment(c));

  const auto before = slurp(c.output_dir / "train.isac");
  std::ostringstream quiet;
  load_or_generate(c, quiet);
  CHECK(quiet.str().empty());  // reused, not regenerated

  c.seed = 9;
  std::ostringstream again;
  load_or_generate(c, again);
  CHECK(!again.str().empty());
  CHECK(slurp(c.output_dir / "train.isac") != before);
}

TEST_CASE("desk generate is fast, seeded and echoes P=10, Q=5") {
  auto c = ExperimentConfig::desk();
  c.output_dir = fs::temp_directory_path() / "isac_cli_desk_a";
  fs::remove_all(c.output_dir);
  std::ostringstream log;
  const auto start = std::chrono::steady_clock::now();
  cmd_generate(c, log);
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() < 60.0);
  const auto header = channel::read_dataset(c.output_dir / "train.isac").header;
  CHECK(header.p == 10);
  CHECK(header.q == 5);
  CHECK(header.count == 600);

  auto again = c;
  again.output_dir = fs::temp_directory_path() / "isac_cli_desk_b";
  fs::remove_all(again.output_dir);
  cmd_generate(again, log);
  CHECK(slurp(c.output_dir / "train.isac") == slurp(again.output_dir / "train.isac"));
  CHECK(slurp(c.output_dir / "test.isac") == slurp(again.output_dir / "test.isac"));
  fs::remove_all(c.output_dir);
  fs::remove_all(again.output_dir);
}

TEST_CASE("eval before train reports the missing checkpoint") {
  auto c = tiny("missing");
  std::ostringstream log;
  CHECK_THROWS_AS(cmd_eval(c, log), IoError);
}

TEST_CASE("train and evaluate commands are byte-reproducible") {
  auto c = tiny("repro");
  std::ostringstream log;
  cmd_train(c, log);
  const auto eval = cmd_eval(c, log);
  REQUIRE(eval.rows.size() == 2);
  CHECK(eval.rows[0].scheme == "proposed");
  CHECK(eval.rows[0].n == 8);
  const auto report = slurp(c.output_dir / "models" / "proposed" / "report.json");
  const auto ckpt = slurp(c.output_dir / "models" / "proposed" / "best.ntar");
  const auto csv = slurp(c.output_dir / "eval.csv");

  cmd_train(c, log);
  cmd_eval(c, log);
  CHECK(slurp(c.output_dir / "models" / "proposed" / "report.json") == report);
  CHECK(slurp(c.output_dir / "models" / "proposed" / "best.ntar") == ckpt);
  CHECK(slurp(c.output_dir / "eval.csv") == csv);
  CHECK(ResultTable::parse_csv(csv) == eval);

  // report schema
  const auto r = nlohmann::json::parse(report);
  CHECK(r.size() == 8);
  CHECK(r.at("model").get<std::string>() == "proposed");
  CHECK(r.at("train_loss").size() == 2);
  CHECK(r.at("val_loss").size() == 2);
  CHECK(r.at("steps").get<std::size_t>() == 6);
  CHECK(r.at("best_epoch").get<std::size_t>() < 2);
  CHECK(r.at("best_val").is_number());
  CHECK(r.at("stopped_early").is_boolean());
  CHECK(r.at("best_checkpoint").is_string());

  SUBCASE("a single-speed test set gives one bin equal to the whole-set score") {
    auto s = c;
    s.data.scenario.speed_min_kmh = 35.0;
    s.data.scenario.speed_max_kmh = 35.0;
    s.output_dir = c.output_dir / "one_speed";
    fs::create_directories(s.output_dir);
    fs::copy(c.output_dir / "models", s.output_dir / "models", fs::copy_options::recursive);
    const auto speed = cmd_sweep_speed(s, log);
    const auto whole = cmd_eval(s, log);
    REQUIRE(speed.rows.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(speed.rows[i].bin == "30-40");
      CHECK(speed.rows[i].nmse_global == whole.rows[i].nmse_global);
      CHECK(speed.rows[i].n == 8);
    }
    CHECK(fs::exists(s.output_dir / "speed.svg"));
  }

  SUBCASE("speed bins partition the test set") {
    const auto speed = cmd_sweep_speed(c, log);
    std::size_t n = 0;
    for (const auto& r : speed.rows) {
      if (r.scheme == "proposed") n += r.n;
    }
    const auto test = channel::read_dataset(c.output_dir / "test.isac");
    std::size_t inside = 0;
    for (const auto& s : test.samples) inside += speed_bin(c.eval, s.speed_kmh).empty() ? 0 : 1;
    CHECK(n == inside);
  }

  SUBCASE("the clean SNR row equals the noiseless evaluation and noise hurts") {
    const auto snr = cmd_sweep_snr(c, log);
    REQUIRE(snr.rows.size() == 6);
    CHECK(snr.rows[0].bin == "clean");
    CHECK(snr.rows[0].nmse_global == eval.rows[0].nmse_global);
    CHECK(snr.rows[1].bin == "0");
    CHECK(snr.rows[2].bin == "20");
    CHECK(snr.rows[1].nmse_global > snr.rows[2].nmse_global);
    const auto again = cmd_sweep_snr(c, log);
    CHECK(again == snr);
  }
}

TEST_CASE("ablation writes one row per variant and seed plus the seed means") {
  auto c = tiny("ablate");
  c.train.epochs = 1;
  c.repeats = 2;
  std::ostringstream log;
  const auto t = cmd_ablate(c, log);
  REQUIRE(t.rows.size() == 15);
  for (std::size_t v = 0; v < 5; ++v) {
    const auto& a = t.rows[v];
    const auto& b = t.rows[5 + v];
    const auto& mean = t.rows[10 + v];
    CHECK(a.scheme == ablation_variants()[v].label);
    CHECK(a.seed == 1);
    CHECK(b.seed == 2);
    CHECK(mean.bin == "mean");
    CHECK(mean.nmse_global == doctest::Approx((a.nmse_global + b.nmse_global) / 2).epsilon(1e-12));
  }
  CHECK(t.rows[0].nmse_global != t.rows[5].nmse_global);  // different training seeds
  CHECK(ResultTable::parse_csv(slurp(c.output_dir / "ablation.csv")) == t);
}
