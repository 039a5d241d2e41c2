// SPDX-License-Identifier: Apache-2.0
#include "isac/model/batch.hpp"

#include <algorithm>

#include "isac/model/predictor.hpp"
#include "isac/preprocess/preprocess.hpp"

namespace isac::model {
namespace {

template <typename T>
void put_planes(Tensor<T>& dst, std::size_t row, const Tensor<double>& src) {
  std::transform(src.data().begin(), src.data().end(), dst.data().begin() + static_cast<long>(row * src.size()),
                 [](double v) { return static_cast<T>(v); });
}

}  // namespace

template <typename T>
Batch<T> make_batch(std::span<const CsiSample* const> samples) {
  if (samples.empty()) throw UsageError("make_batch: no samples");
  const auto& first = *samples[0];
  const std::size_t K = first.k(), N = first.n(), P = first.p, Q = first.q;
  Batch<T> b;
  b.rows = samples.size() * N;
  b.k = K;
  b.p = P;
  b.q = Q;
  const num::Shape in{b.rows, 2, K, P};
  b.c_freq = Tensor<T>(in);
  b.c_delay = Tensor<T>(in);
  b.s_freq = Tensor<T>(in);
  b.s_delay = Tensor<T>(in);
  b.target = Tensor<T>({b.rows, Q, 2, K});
  b.mu.resize(b.rows);
  b.sigma.resize(b.rows);
  std::size_t row = 0;
  for (const CsiSample* s : samples) {
    if (s->k() != K || s->n() != N || s->p != P || s->q != Q) throw DimensionError("make_batch: mixed window shapes");
    for (std::size_t n = 0; n < N; ++n, ++row) {
      const auto sl = prep::slice_antenna(*s, n);
      put_planes(b.c_freq, row, sl.c_freq);
      put_planes(b.c_delay, row, sl.c_delay);
      put_planes(b.s_freq, row, sl.s_freq);
      put_planes(b.s_delay, row, sl.s_delay);
      b.mu[row] = static_cast<T>(sl.stats.comm.mu);
      b.sigma[row] = static_cast<T>(sl.stats.comm.sigma);
      const auto tgt = prep::target(*s, n);  // [K, Q]
      T* out = &b.target[row * Q * 2 * K];
      for (std::size_t t = 0; t < Q; ++t) {
        for (std::size_t k = 0; k < K; ++k) {
          out[(t * 2 + 0) * K + k] = static_cast<T>(tgt[k * Q + t].real());
          out[(t * 2 + 1) * K + k] = static_cast<T>(tgt[k * Q + t].imag());
        }
      }
    }
  }
  return b;
}

template <typename T>
num::ComplexTensor row_to_complex(const Tensor<T>& out, std::size_t b) {
  const auto& s = out.shape();
  if (s.size() != 4 || s[2] != 2 || b >= s[0]) throw DimensionError("row_to_complex: expected [B, Q, 2, K] output");
  const std::size_t Q = s[1], K = s[3];
  num::ComplexTensor c({K, Q});
  const T* src = &out[b * Q * 2 * K];
  for (std::size_t t = 0; t < Q; ++t) {
    for (std::size_t k = 0; k < K; ++k) c[k * Q + t] = {src[(t * 2) * K + k], src[(t * 2 + 1) * K + k]};
  }
  return c;
}

template <typename T>
num::ComplexTensor predict(const Predictor& predictor, const ParamStore<T>& params, const CsiSample& sample) {
  if (sample.k() != predictor.k() || sample.p != predictor.p() || sample.q != predictor.q()) {
    throw ConfigError("predict: sample window (K=" + std::to_string(sample.k()) + ", P=" + std::to_string(sample.p) +
                      ", Q=" + std::to_string(sample.q) + ") does not match the model");
  }
  const auto batch = make_batch<T>(sample);
  Graph<T> g;
  const auto out = predictor.forward(g, params, batch).value();
  const std::size_t N = sample.n(), K = sample.k(), Q = sample.q;
  num::ComplexTensor result({N, K, Q});
  for (std::size_t n = 0; n < N; ++n) {
    const auto row = row_to_complex(out, n);
    std::copy(row.data().begin(), row.data().end(), result.data().begin() + static_cast<long>(n * K * Q));
  }
  return result;
}

template Batch<float> make_batch<float>(std::span<const CsiSample* const>);
template Batch<double> make_batch<double>(std::span<const CsiSample* const>);
template num::ComplexTensor row_to_complex<float>(const Tensor<float>&, std::size_t);
template num::ComplexTensor row_to_complex<double>(const Tensor<double>&, std::size_t);
template num::ComplexTensor predict<float>(const Predictor&, const ParamStore<float>&, const CsiSample&);
template num::ComplexTensor predict<double>(const Predictor&, const ParamStore<double>&, const CsiSample&);

}  // namespace isac::model
