// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>

#include "isac/channel/dataset.hpp"
#include "isac/numerics/tensor.hpp"

namespace isac::prep {

using channel::CsiSample;
using num::ComplexTensor;
using num::Tensor;

/// Scalar z-score statistics of one stream.
struct ZStats {
  double mu = 0.0;
  double sigma = 1.0;
};

struct NormStats {
  ZStats comm;
  ZStats sense;
};

/// The four per-antenna network inputs, each [2, K, P] (plane 0 real, plane 1 imag).
struct AntennaSlice {
  Tensor<double> c_freq;
  Tensor<double> c_delay;
  Tensor<double> s_freq;
  Tensor<double> s_delay;
  NormStats stats;
};

/// Historical communication stream of antenna n: element n of each h[k], arranged [K, P].
ComplexTensor comm_stream(const CsiSample& sample, std::size_t n);
/// Historical sensing stream of antenna n: diagonal element (n, n) of each H[k], arranged [K, P].
ComplexTensor sense_stream(const CsiSample& sample, std::size_t n);
/// Future communication CSI of antenna n, [K, Q].
ComplexTensor target(const CsiSample& sample, std::size_t n);

/// z-score over all entries; stats are written to `out`. Throws DegenerateError for sigma < 1e-12.
Tensor<double> normalize(const Tensor<double>& x, ZStats& out);
Tensor<double> normalize_with(const Tensor<double>& x, const ZStats& stats);
Tensor<double> de_normalize(const Tensor<double>& x, const ZStats& stats);

/// Builds the frequency and delay (K-point IDFT along K) views of both streams for
/// antenna n (0-based) and normalizes them. Comm stats come from the comm frequency
/// view and apply to both comm views; likewise for sensing.
AntennaSlice slice_antenna(const CsiSample& sample, std::size_t n);

/// Sentinel meaning "no noise".
inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

/// Adds circular complex Gaussian noise to the P historical slots of both streams so
/// that the per-stream signal-to-noise power ratio is 10^(snr_db/10). Target slots are
/// left untouched.
CsiSample add_csi_noise(const CsiSample& sample, double snr_db, std::uint64_t seed);

}  // namespace isac::prep
