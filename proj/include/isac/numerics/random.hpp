// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "isac/numerics/tensor.hpp"

namespace isac::num {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; derives independent child seeds from (seed, stream).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

/// Glorot/Xavier uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <typename T>
Tensor<T> glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor<T> t(std::move(shape));
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  for (auto& v : t.vec()) v = static_cast<T>(dist(rng));
  return t;
}

}  // namespace isac::num
