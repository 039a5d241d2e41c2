// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isac/channel/dataset.hpp"
#include "isac/model/predictor.hpp"
#include "isac/numerics/param_store.hpp"
#include "isac/preprocess/preprocess.hpp"

namespace isac::train {

using channel::CsiSample;
using channel::Dataset;
using num::ParamStore;

enum class FreezePolicy { paper_default, none, all_backbone };

std::string to_string(FreezePolicy policy);
FreezePolicy freeze_policy_from_string(const std::string& name);

/// paper_default freezes backbone attention and feed-forward tensors; all_backbone
/// freezes every backbone tensor; none leaves everything trainable.
template <typename T>
void apply_freeze_policy(ParamStore<T>& params, FreezePolicy policy);

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;   // samples; each contributes N antenna rows
  double lr = 1e-3;
  double min_lr = 0.0;           // cosine floor
  std::uint64_t seed = 1;
  std::optional<std::array<double, 2>> snr_train_range_db = std::array<double, 2>{0.0, 25.0};
  FreezePolicy freeze_policy = FreezePolicy::paper_default;
  std::size_t patience = 10;
  std::size_t max_steps = 0;     // 0 = run all epochs
  std::size_t chunk_rows = 32;   // rows per tape; chunks are reduced in order
  num::AdamConfig adam;

  void validate() const;
};

struct TrainReport {
  std::string model;
  std::vector<double> train_loss;  // per epoch, batch-weighted mean of batch NMSE
  std::vector<double> val_loss;    // per epoch, ratio-of-sums over the validation set
  std::vector<double> step_loss;   // per optimizer step
  std::size_t steps = 0;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
  bool stopped_early = false;
  double wall_seconds = 0.0;
  std::filesystem::path best_checkpoint;  // empty when no checkpoint directory was given
};

struct TrainResult {
  TrainReport report;
  ParamStore<float> params;  // best by validation loss, or final when there is no validation set
};

/// Mini-batch Adam on the NMSE loss in 32-bit. Validation runs after every epoch.
/// With `checkpoint_dir` set, the best parameters are written as best.ntar plus a
/// best.json sidecar each time validation improves. Throws TrainingError on a
/// non-finite loss.
TrainResult train(const model::Predictor& predictor, const ParamStore<double>& init, const Dataset& train_set,
                  const Dataset& val_set, const TrainConfig& config,
                  const std::filesystem::path& checkpoint_dir = {});

/// Tail split: the last ceil(fraction * n) samples become the validation set.
std::pair<Dataset, Dataset> split_validation(const Dataset& data, double fraction);

struct SampleError {
  double err = 0.0;  // sum over antennas of |pred - truth|^2
  double ref = 0.0;  // sum over antennas of |truth|^2
};

/// Per-sample squared error of the predictor. With a finite `snr_db`, the historical
/// slots of sample i get noise seeded by derive_seed(noise_seed, i).
std::vector<SampleError> evaluate(const model::Predictor& predictor, const ParamStore<float>& params,
                                  std::span<const CsiSample> samples, double snr_db = prep::kNoNoise,
                                  std::uint64_t noise_seed = 0, std::size_t batch_size = 32);

struct Score {
  double nmse_global = 0.0;  // sum err / sum ref
  double nmse_mean = 0.0;    // mean of per-sample ratios
  std::size_t n = 0;
};

Score summarize(std::span<const SampleError> errors);

/// Checkpoint I/O: parameters as a named-tensor archive, metadata as JSON text.
void save_checkpoint(const std::filesystem::path& stem, const ParamStore<float>& params, const std::string& sidecar_json);
void load_checkpoint(const std::filesystem::path& stem, ParamStore<float>& params);

std::string report_json(const TrainReport& report);

}  // namespace isac::train
