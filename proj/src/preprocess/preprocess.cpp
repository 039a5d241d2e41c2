// SPDX-License-Identifier: Apache-2.0
#include "isac/preprocess/preprocess.hpp"

#include <cmath>

#include "isac/numerics/dft.hpp"
#include "isac/numerics/random.hpp"

namespace isac::prep {
namespace {

void check_antenna(const CsiSample& s, std::size_t n) {
  if (n >= s.n()) {
    throw UsageError("antenna index " + std::to_string(n) + " out of range for N=" + std::to_string(s.n()));
  }
}

double mean_power(std::span<const num::cplx> v) {
  double e = 0.0;
  for (const auto& x : v) e += std::norm(x);
  return v.empty() ? 0.0 : e / static_cast<double>(v.size());
}

}  // namespace

ComplexTensor comm_stream(const CsiSample& s, std::size_t n) {
  check_antenna(s, n);
  const std::size_t K = s.k(), N = s.n(), P = s.p;
  ComplexTensor out({K, P});
  for (std::size_t t = 0; t < P; ++t) {
    for (std::size_t k = 0; k < K; ++k) out[k * P + t] = s.comm[(t * K + k) * N + n];
  }
  return out;
}

ComplexTensor sense_stream(const CsiSample& s, std::size_t n) {
  check_antenna(s, n);
  const std::size_t K = s.k(), N = s.n(), P = s.p;
  ComplexTensor out({K, P});
  for (std::size_t t = 0; t < P; ++t) {
    for (std::size_t k = 0; k < K; ++k) out[k * P + t] = s.sense[((t * K + k) * N + n) * N + n];
  }
  return out;
}

ComplexTensor target(const CsiSample& s, std::size_t n) {
  check_antenna(s, n);
  const std::size_t K = s.k(), N = s.n(), P = s.p, Q = s.q;
  ComplexTensor out({K, Q});
  for (std::size_t t = 0; t < Q; ++t) {
    for (std::size_t k = 0; k < K; ++k) out[k * Q + t] = s.comm[((P + t) * K + k) * N + n];
  }
  return out;
}

Tensor<double> normalize(const Tensor<double>& x, ZStats& out) {
  const double n = static_cast<double>(x.size());
  double mu = 0.0;
  for (double v : x.data()) mu += v;
  mu /= n;
  double var = 0.0;
  for (double v : x.data()) var += (v - mu) * (v - mu);
  const double sigma = std::sqrt(var / n);
  if (!(sigma >= 1e-12)) throw DegenerateError("degenerate window: standard deviation below 1e-12");
  out = {mu, sigma};
  return normalize_with(x, out);
}

Tensor<double> normalize_with(const Tensor<double>& x, const ZStats& st) {
  Tensor<double> y = x;
  for (auto& v : y.vec()) v = (v - st.mu) / st.sigma;
  return y;
}

Tensor<double> de_normalize(const Tensor<double>& x, const ZStats& st) {
  Tensor<double> y = x;
  for (auto& v : y.vec()) v = v * st.sigma + st.mu;
  return y;
}

AntennaSlice slice_antenna(const CsiSample& s, std::size_t n) {
  const auto cf = comm_stream(s, n);
  const auto sf = sense_stream(s, n);
  const auto cd = num::idft(cf, 0);
  const auto sd = num::idft(sf, 0);
  AntennaSlice out;
  out.c_freq = normalize(cf.to_real(), out.stats.comm);
  out.c_delay = normalize_with(cd.to_real(), out.stats.comm);
  out.s_freq = normalize(sf.to_real(), out.stats.sense);
  out.s_delay = normalize_with(sd.to_real(), out.stats.sense);
  return out;
}

CsiSample add_csi_noise(const CsiSample& sample, double snr_db, std::uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0) return sample;
  CsiSample out = sample;
  num::Rng rng(seed);
  const double ratio = std::pow(10.0, snr_db / 10.0);
  const std::size_t hist_comm = sample.p * sample.k() * sample.n();
  auto comm = out.comm.data().subspan(0, hist_comm);
  auto sense = out.sense.data();
  for (auto stream : {comm, sense}) {
    const double sig = mean_power(stream);
    // Circular Gaussian: each quadrature carries half the noise power.
    const double std_quad = std::sqrt(sig / ratio / 2.0);
    for (auto& v : stream) v += num::cplx(std_quad * num::gaussian(rng), std_quad * num::gaussian(rng));
  }
  return out;
}

}  // namespace isac::prep
