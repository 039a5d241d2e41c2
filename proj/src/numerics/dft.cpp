// SPDX-License-Identifier: Apache-2.0
#include "isac/numerics/dft.hpp"

#include <cmath>
#include <numbers>

namespace isac::num {
namespace {

// Twiddles are indexed by (k*n) mod K so every product reuses an exactly
// reduced angle instead of a growing phase argument.
std::vector<cplx> transform(std::span<const cplx> x, double sign) {
  const std::size_t n = x.size();
  std::vector<cplx> out(n);
  if (n == 0) return out;
  std::vector<cplx> twiddle(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n);
    twiddle[m] = {std::cos(angle), std::sin(angle)};
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc{0.0, 0.0};
    std::size_t idx = 0;
    for (std::size_t j = 0; j < n; ++j) {
      acc += x[j] * twiddle[idx];
      idx += k;
      if (idx >= n) idx -= n;
    }
    out[k] = acc * scale;
  }
  return out;
}

ComplexTensor transform_axis(const ComplexTensor& x, std::size_t axis, double sign) {
  const auto e = axis_extents(x.shape(), axis);
  ComplexTensor out(x.shape());
  std::vector<cplx> line(e.length);
  for (std::size_t o = 0; o < e.outer; ++o) {
    for (std::size_t i = 0; i < e.inner; ++i) {
      const std::size_t base = o * e.length * e.inner + i;
      for (std::size_t k = 0; k < e.length; ++k) line[k] = x[base + k * e.inner];
      const auto t = transform(line, sign);
      for (std::size_t k = 0; k < e.length; ++k) out[base + k * e.inner] = t[k];
    }
  }
  return out;
}

}  // namespace

std::vector<cplx> dft(std::span<const cplx> x) { return transform(x, -1.0); }
std::vector<cplx> idft(std::span<const cplx> x) { return transform(x, +1.0); }

ComplexTensor dft(const ComplexTensor& x, std::size_t axis) { return transform_axis(x, axis, -1.0); }
ComplexTensor idft(const ComplexTensor& x, std::size_t axis) { return transform_axis(x, axis, +1.0); }

}  // namespace isac::num
