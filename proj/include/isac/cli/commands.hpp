// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "isac/cli/experiment.hpp"
#include "isac/cli/results.hpp"

namespace isac::cli {

/// Scheme names: proposed, proposed_nosense, proposed_no_channel_attention,
/// proposed_no_cross_attention, proposed_no_backbone, and lstm / transformer / cnn
/// with an optional _nosense suffix. Unknown names are a ConfigError.
std::unique_ptr<model::Predictor> make_predictor(const std::string& scheme, const ExperimentConfig& config);

/// Trainable parameter count of the full main model under the configured freeze policy;
/// baselines with hidden = 0 are sized to it.
std::size_t trainable_budget(const ExperimentConfig& config);

struct AblationVariant {
  std::string scheme;
  std::string label;
};
/// Full model first, then the four single-module removals.
const std::vector<AblationVariant>& ablation_variants();

struct Datasets {
  channel::Dataset train;
  channel::Dataset test;
};

/// Reads train.isac / test.isac from the output directory, generating and writing them
/// first if absent.
Datasets load_or_generate(const ExperimentConfig& config, std::ostream& log);

/// Writes config.json into the output directory (the exact resolved configuration).
void echo_config(const ExperimentConfig& config);

void cmd_generate(const ExperimentConfig& config, std::ostream& log);

/// Trains every configured scheme into <out>/models/<scheme>/best.{ntar,json} plus report.json.
std::vector<train::TrainReport> cmd_train(const ExperimentConfig& config, std::ostream& log);

/// Loads a trained checkpoint written by cmd_train or cmd_ablate.
num::ParamStore<float> load_trained(const model::Predictor& predictor, const std::filesystem::path& stem);

/// Test-set NMSE per scheme -> eval.csv.
ResultTable cmd_eval(const ExperimentConfig& config, std::ostream& log);

/// Test NMSE per scheme per speed bin -> speed.csv (and speed.svg). Empty bins are skipped.
ResultTable cmd_sweep_speed(const ExperimentConfig& config, std::ostream& log);

/// Test NMSE per scheme at each SNR of noisy historical CSI plus a clean row -> snr.csv.
ResultTable cmd_sweep_snr(const ExperimentConfig& config, std::ostream& log);

/// Trains and tests the five ablation variants for `repeats` seeds -> ablation.csv.
/// Per-seed rows carry bin "test"; the seed mean of each variant carries bin "mean".
/// Checkpoints go to <out>/ablation/<scheme>/seed<s>/. Training reports are appended to
/// `reports` when given.
ResultTable cmd_ablate(const ExperimentConfig& config, std::ostream& log,
                       std::vector<train::TrainReport>* reports = nullptr);

/// Speed bin label of a sample, e.g. "10-20"; empty when outside [speed_min, speed_max].
std::string speed_bin(const EvalConfig& eval, double speed_kmh);

}  // namespace isac::cli
