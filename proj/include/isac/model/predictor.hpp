// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "isac/model/batch.hpp"
#include "isac/numerics/autodiff.hpp"

namespace isac::model {

using num::Graph;
using num::ParamStore;
using num::Var;

/// Common surface of the main model and the baselines: same batch inputs, same
/// de-normalized [B, Q, 2, K] output, so training and evaluation treat them alike.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual std::string name() const = 0;
  virtual std::size_t k() const = 0;
  virtual std::size_t p() const = 0;
  virtual std::size_t q() const = 0;

  /// Fresh parameters; deterministic in `seed`.
  virtual ParamStore<double> init_params(std::uint64_t seed) const = 0;

  virtual Var<float> forward(Graph<float>& g, const ParamStore<float>& params, const Batch<float>& batch) const = 0;
  virtual Var<double> forward(Graph<double>& g, const ParamStore<double>& params, const Batch<double>& batch) const = 0;
};

/// Routes both precisions to Derived::template run<T>.
template <typename Derived>
class PredictorBase : public Predictor {
 public:
  Var<float> forward(Graph<float>& g, const ParamStore<float>& params, const Batch<float>& batch) const override {
    return static_cast<const Derived&>(*this).template run<float>(g, params, batch);
  }
  Var<double> forward(Graph<double>& g, const ParamStore<double>& params, const Batch<double>& batch) const override {
    return static_cast<const Derived&>(*this).template run<double>(g, params, batch);
  }
};

/// Runs the predictor on every antenna of `sample`; result is [N, K, Q].
template <typename T>
num::ComplexTensor predict(const Predictor& predictor, const ParamStore<T>& params, const CsiSample& sample);

}  // namespace isac::model
