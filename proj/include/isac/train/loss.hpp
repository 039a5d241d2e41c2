// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "isac/numerics/autodiff.hpp"
#include "isac/numerics/tensor.hpp"

namespace isac::train {

using num::ComplexTensor;
using num::Tensor;
using num::Var;

/// sum |pred - truth|^2 / sum |truth|^2 over every entry. Throws DegenerateError for
/// all-zero truth and DimensionError for mismatched shapes.
double nmse(const ComplexTensor& pred, const ComplexTensor& truth);
template <typename T>
double nmse(const Tensor<T>& pred, const Tensor<T>& truth);

/// Differentiable ratio-of-sums NMSE over a whole batch.
template <typename T>
Var<T> nmse_loss(Var<T> pred, const Tensor<T>& truth);

/// sum |pred - truth|^2 / denominator; lets a batch split into chunks share one
/// denominator so the chunk losses add up to the batch NMSE.
template <typename T>
Var<T> scaled_squared_error(Var<T> pred, const Tensor<T>& truth, double denominator);

template <typename T>
double energy(const Tensor<T>& x);

}  // namespace isac::train
