// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "isac/channel/dataset.hpp"
#include "isac/numerics/tensor.hpp"

namespace isac::model {

using channel::CsiSample;
using num::Tensor;

/// A stack of per-antenna network inputs. Row b is antenna (b mod N) of sample (b / N).
template <typename T>
struct Batch {
  std::size_t rows = 0;
  std::size_t k = 0;
  std::size_t p = 0;
  std::size_t q = 0;
  Tensor<T> c_freq;   // [B, 2, K, P], normalized
  Tensor<T> c_delay;  // [B, 2, K, P]
  Tensor<T> s_freq;   // [B, 2, K, P]
  Tensor<T> s_delay;  // [B, 2, K, P]
  std::vector<T> mu;     // comm-stream stats per row, for de-normalization
  std::vector<T> sigma;
  Tensor<T> target;   // [B, Q, 2, K], raw (not normalized)
};

/// Slices every antenna of every sample. Throws DegenerateError for all-zero windows.
template <typename T>
Batch<T> make_batch(std::span<const CsiSample* const> samples);

template <typename T>
Batch<T> make_batch(const CsiSample& sample) {
  const CsiSample* one = &sample;
  return make_batch<T>(std::span<const CsiSample* const>(&one, 1));
}

/// Row b of a [B, Q, 2, K] prediction as a complex [K, Q] matrix.
template <typename T>
num::ComplexTensor row_to_complex(const Tensor<T>& out, std::size_t b);

}  // namespace isac::model
