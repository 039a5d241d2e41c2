// SPDX-License-Identifier: Apache-2.0
#include "isac/model/layers.hpp"

#include <cmath>

namespace isac::model {

void add_linear(ParamStore<double>& s, const std::string& prefix, std::size_t in, std::size_t out, num::Rng& rng) {
  s.add(prefix + ".weight", num::glorot_uniform<double>({in, out}, in, out, rng));
  s.add(prefix + ".bias", Tensor<double>::zeros({out}));
}

void add_conv(ParamStore<double>& s, const std::string& prefix, std::size_t cout, std::size_t cin, std::size_t kh,
              std::size_t kw, num::Rng& rng) {
  s.add(prefix + ".weight", num::glorot_uniform<double>({cout, cin, kh, kw}, cin * kh * kw, cout * kh * kw, rng));
  s.add(prefix + ".bias", Tensor<double>::zeros({cout}));
}

void add_layer_norm(ParamStore<double>& s, const std::string& prefix, std::size_t n) {
  s.add(prefix + ".weight", Tensor<double>::ones({n}));
  s.add(prefix + ".bias", Tensor<double>::zeros({n}));
}

void add_convlstm(ParamStore<double>& s, const std::string& prefix, std::size_t in_channels, std::size_t hidden,
                  std::size_t kernel, num::Rng& rng) {
  add_conv(s, prefix + ".gates", 4 * hidden, in_channels + hidden, kernel, 1, rng);
}

void add_attention(ParamStore<double>& s, const std::string& prefix, std::size_t d, num::Rng& rng) {
  for (const char* part : {".q", ".k", ".v", ".o"}) add_linear(s, prefix + part, d, d, rng);
}

template <typename T>
Var<T> linear_p(Graph<T>& g, const ParamStore<T>& s, const std::string& prefix, Var<T> x) {
  return num::linear(x, g.parameter(s, prefix + ".weight"), g.parameter(s, prefix + ".bias"));
}

template <typename T>
Var<T> conv_p(Graph<T>& g, const ParamStore<T>& s, const std::string& prefix, Var<T> x) {
  return num::conv2d(x, g.parameter(s, prefix + ".weight"), g.parameter(s, prefix + ".bias"));
}

template <typename T>
Var<T> layer_norm_p(Graph<T>& g, const ParamStore<T>& s, const std::string& prefix, Var<T> x) {
  return num::layer_norm(x, g.parameter(s, prefix + ".weight"), g.parameter(s, prefix + ".bias"), x.shape().size() - 1,
                         static_cast<T>(1e-5));
}

template <typename T>
ConvLstmState<T> zero_state(Graph<T>& g, std::size_t batch, std::size_t hidden, std::size_t height) {
  auto z = g.constant(Tensor<T>::zeros({batch, hidden, height, 1}));
  return {z, z};
}

template <typename T>
ConvLstmState<T> convlstm_cell(Graph<T>& g, const ParamStore<T>& s, const std::string& prefix, Var<T> x,
                               const ConvLstmState<T>& state) {
  const num::Shape xs = x.shape();
  const num::Shape hs = state.h.shape();
  if (xs.size() != 4 || hs.size() != 4 || xs[0] != hs[0] || xs[2] != hs[2] || xs[3] != hs[3]) {
    throw DimensionError("convlstm_cell: input " + num::shape_str(xs) + " does not match state " + num::shape_str(hs));
  }
  const std::size_t hidden = hs[1];
  auto gates = conv_p(g, s, prefix + ".gates", num::concat<T>({x, state.h}, 1));
  auto i = num::sigmoid(num::slice(gates, 1, 0, hidden));
  auto f = num::sigmoid(num::slice(gates, 1, hidden, hidden));
  auto o = num::sigmoid(num::slice(gates, 1, 2 * hidden, hidden));
  auto cand = num::tanh(num::slice(gates, 1, 3 * hidden, hidden));
  auto c = num::add(num::mul(f, state.c), num::mul(i, cand));
  auto h = num::mul(o, num::tanh(c));
  return {h, c};
}

template <typename T>
Var<T> convlstm_sequence(Graph<T>& g, const ParamStore<T>& s, const std::string& prefix, Var<T> x,
                         std::size_t hidden) {
  const num::Shape xs = x.shape();
  auto state = zero_state(g, xs[0], hidden, xs[2]);
  std::vector<Var<T>> outs;
  outs.reserve(xs[3]);
  for (std::size_t t = 0; t < xs[3]; ++t) {
    state = convlstm_cell(g, s, prefix, num::slice(x, 3, t, 1), state);
    outs.push_back(state.h);
  }
  return num::concat(outs, 3);
}

template <typename T>
Var<T> attend(Var<T> q, Var<T> k, Var<T> v, std::size_t heads, bool causal, Var<T>* weights) {
  const std::size_t B = q.shape()[0], Pq = q.shape()[1], D = q.shape()[2], Pk = k.shape()[1];
  if (D % heads != 0) throw ConfigError("attention width must be divisible by the head count");
  const std::size_t dh = D / heads;
  auto split = [&](Var<T> x, std::size_t len) { return num::permute(num::reshape(x, {B, len, heads, dh}), {0, 2, 1, 3}); };
  auto qh = split(q, Pq);
  auto kh = split(k, Pk);
  auto vh = split(v, Pk);
  auto scores = num::scale(num::matmul(qh, kh, true), static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))));
  auto w = num::softmax(scores, 3, causal);
  if (weights) *weights = w;
  auto ctx = num::matmul(w, vh);  // [B, H, Pq, dh]
  return num::reshape(num::permute(ctx, {0, 2, 1, 3}), {B, Pq, D});
}

template <typename T>
Var<T> attention_p(Graph<T>& g, const ParamStore<T>& s, const std::string& prefix, Var<T> query, Var<T> context,
                   std::size_t heads, bool causal, Var<T>* weights) {
  auto q = linear_p(g, s, prefix + ".q", query);
  auto k = linear_p(g, s, prefix + ".k", context);
  auto v = linear_p(g, s, prefix + ".v", context);
  return linear_p(g, s, prefix + ".o", attend(q, k, v, heads, causal, weights));
}

template <typename T>
Tensor<T> sinusoidal_encoding(std::size_t positions, std::size_t features) {
  Tensor<T> pe({positions, features});
  for (std::size_t p = 0; p < positions; ++p) {
    for (std::size_t j = 0; j < features; ++j) {
      const double freq = std::pow(10000.0, -static_cast<double>(j - j % 2) / static_cast<double>(features));
      const double arg = static_cast<double>(p) * freq;
      pe[p * features + j] = static_cast<T>(j % 2 == 0 ? std::sin(arg) : std::cos(arg));
    }
  }
  return pe;
}

template <typename T>
Var<T> planes_to_tokens(Var<T> x) {
  const num::Shape xs = x.shape();
  return num::reshape(num::permute(x, {0, 3, 1, 2}), {xs[0], xs[3], xs[1] * xs[2]});
}

#define ISAC_INSTANTIATE_LAYERS(T)                                                                                \
  template Var<T> linear_p<T>(Graph<T>&, const ParamStore<T>&, const std::string&, Var<T>);                       \
  template Var<T> conv_p<T>(Graph<T>&, const ParamStore<T>&, const std::string&, Var<T>);                         \
  template Var<T> layer_norm_p<T>(Graph<T>&, const ParamStore<T>&, const std::string&, Var<T>);                   \
  template ConvLstmState<T> zero_state<T>(Graph<T>&, std::size_t, std::size_t, std::size_t);                      \
  template ConvLstmState<T> convlstm_cell<T>(Graph<T>&, const ParamStore<T>&, const std::string&, Var<T>,         \
                                             const ConvLstmState<T>&);                                            \
  template Var<T> convlstm_sequence<T>(Graph<T>&, const ParamStore<T>&, const std::string&, Var<T>, std::size_t); \
  template Var<T> attend<T>(Var<T>, Var<T>, Var<T>, std::size_t, bool, Var<T>*);                                  \
  template Var<T> attention_p<T>(Graph<T>&, const ParamStore<T>&, const std::string&, Var<T>, Var<T>,             \
                                 std::size_t, bool, Var<T>*);                                                     \
  template Tensor<T> sinusoidal_encoding<T>(std::size_t, std::size_t);                                            \
  template Var<T> planes_to_tokens<T>(Var<T>);

ISAC_INSTANTIATE_LAYERS(float)
ISAC_INSTANTIATE_LAYERS(double)

}  // namespace isac::model
