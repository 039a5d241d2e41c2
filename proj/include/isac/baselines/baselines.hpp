// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "isac/model/layers.hpp"
#include "isac/model/predictor.hpp"

namespace isac::baselines {

using model::Batch;
using num::Graph;
using num::ParamStore;
using num::Var;

enum class Kind { lstm, transformer, cnn };

std::string to_string(Kind kind);
Kind kind_from_string(const std::string& name);

struct BaselineConfig {
  Kind kind = Kind::lstm;
  std::size_t k = 16;
  std::size_t p = 10;
  std::size_t q = 5;
  std::size_t hidden = 32;  // LSTM state width, transformer d_model, CNN base channels
  std::size_t layers = 2;
  std::size_t heads = 4;    // transformer only
  std::size_t kernel = 3;   // CNN only
  bool use_sensing = true;

  void validate() const;
};

/// LSTM, transformer and CNN predictors. They read the same Batch as the main model
/// and emit the same de-normalized [B, Q, 2, K] output.
class Baseline : public model::PredictorBase<Baseline> {
 public:
  explicit Baseline(BaselineConfig config);

  std::string name() const override;
  std::size_t k() const override { return cfg_.k; }
  std::size_t p() const override { return cfg_.p; }
  std::size_t q() const override { return cfg_.q; }
  const BaselineConfig& config() const { return cfg_; }

  /// Per-slot feature width for the sequence models: 2*2K (comm freq + delay) or
  /// 2*4K with the sensing views appended. For the CNN this is the channel count.
  std::size_t input_width() const;

  ParamStore<double> init_params(std::uint64_t seed) const override;

  template <typename T>
  Var<T> run(Graph<T>& g, const ParamStore<T>& s, const Batch<T>& batch) const;

  /// Transformer only: the [B, heads, P, P] attention weights of each layer from the last run.
  template <typename T>
  Var<T> run_with_attention(Graph<T>& g, const ParamStore<T>& s, const Batch<T>& batch,
                            std::vector<Var<T>>* weights) const;

 private:
  template <typename T>
  Var<T> lstm(Graph<T>& g, const ParamStore<T>& s, Var<T> tokens) const;
  template <typename T>
  Var<T> transformer(Graph<T>& g, const ParamStore<T>& s, Var<T> tokens, std::vector<Var<T>>* weights) const;
  template <typename T>
  Var<T> cnn(Graph<T>& g, const ParamStore<T>& s, Var<T> planes) const;

  BaselineConfig cfg_;
};

/// Picks `hidden` so the parameter count is as close as possible to `target`.
BaselineConfig size_to_budget(BaselineConfig config, std::size_t target);

}  // namespace isac::baselines
