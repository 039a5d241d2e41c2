// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "isac/baselines/baselines.hpp"
#include "isac/channel/dataset.hpp"
#include "isac/model/config.hpp"
#include "isac/train/train.hpp"
#include "json.hpp"

namespace isac::cli {

struct EvalConfig {
  std::size_t batch_size = 32;
  double speed_bin_width = 10.0;  // km/h
  double speed_min = 10.0;
  double speed_max = 100.0;
  std::vector<double> snr_db{0, 5, 10, 15, 20, 25};
  bool svg = true;
};

/// Everything one run needs. The model's K, P and Q always follow the dataset.
struct ExperimentConfig {
  std::string name = "desk";
  std::uint64_t seed = 1;
  channel::DatasetConfig data;
  std::size_t train_count = 600;
  std::size_t test_count = 60;
  model::ModelConfig model;
  baselines::BaselineConfig baseline{.hidden = 0};  // hidden 0 = size to the main model's trainable budget
  train::TrainConfig train;
  double val_fraction = 0.1;
  std::vector<std::string> schemes{"proposed", "proposed_nosense", "lstm", "transformer", "cnn"};
  std::size_t repeats = 3;  // seeds per ablation variant: seed, seed + 1, ...
  EvalConfig eval;
  std::filesystem::path output_dir = "runs/desk";

  /// Desk preset: K=16, N=4 (2x2), 600 training windows.
  static ExperimentConfig desk();
  /// Paper-scale preset: K=48, 32 ports (4x8), 6000 training windows, 12-layer 768-wide backbone.
  static ExperimentConfig paper();

  model::ModelConfig resolved_model() const;
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Strict: unknown keys are a ConfigError; missing keys keep the desk preset's values.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);
std::string dump_experiment(const ExperimentConfig& config);

}  // namespace isac::cli
