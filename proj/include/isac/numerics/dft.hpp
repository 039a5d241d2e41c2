// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "isac/numerics/tensor.hpp"

namespace isac::num {

// Unitary convention: both directions carry 1/sqrt(K), so idft(dft(x)) == x and
// energy is preserved.
//   X[k] = 1/sqrt(K) sum_n x[n] exp(-j 2 pi k n / K)
//   x[n] = 1/sqrt(K) sum_k X[k] exp(+j 2 pi k n / K)

std::vector<cplx> dft(std::span<const cplx> x);
std::vector<cplx> idft(std::span<const cplx> x);

/// Transform every 1-D line of `x` along `axis`.
ComplexTensor dft(const ComplexTensor& x, std::size_t axis);
ComplexTensor idft(const ComplexTensor& x, std::size_t axis);

}  // namespace isac::num
