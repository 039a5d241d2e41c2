// SPDX-License-Identifier: Apache-2.0
#include "isac/baselines/baselines.hpp"

#include <cstdlib>

namespace isac::baselines {

using model::add_conv;
using model::add_layer_norm;
using model::add_linear;
using model::conv_p;
using model::layer_norm_p;
using model::linear_p;
using num::Tensor;

std::string to_string(Kind kind) {
  switch (kind) {
    case Kind::lstm: return "lstm";
    case Kind::transformer: return "transformer";
    case Kind::cnn: return "cnn";
  }
  return "?";
}

Kind kind_from_string(const std::string& name) {
  if (name == "lstm") return Kind::lstm;
  if (name == "transformer") return Kind::transformer;
  if (name == "cnn") return Kind::cnn;
  throw ConfigError("unknown baseline kind '" + name + "'");
}

void BaselineConfig::validate() const {
  if (k < 1 || p < 1 || q < 1 || hidden < 1 || layers < 1 || heads < 1) {
    throw ConfigError("baseline dimensions must be at least 1");
  }
  if (kind == Kind::transformer && hidden % heads != 0) throw ConfigError("transformer width must divide by heads");
  if (kind == Kind::cnn && kernel % 2 == 0) throw ConfigError("CNN kernel size must be odd");
}

Baseline::Baseline(BaselineConfig config) : cfg_(config) { cfg_.validate(); }

std::string Baseline::name() const { return to_string(cfg_.kind) + (cfg_.use_sensing ? "" : "_nosense"); }

std::size_t Baseline::input_width() const {
  const std::size_t views = cfg_.use_sensing ? 4 : 2;
  return cfg_.kind == Kind::cnn ? 2 * views : views * 2 * cfg_.k;
}

ParamStore<double> Baseline::init_params(std::uint64_t seed) const {
  ParamStore<double> s;
  num::Rng rng(seed);
  const std::size_t H = cfg_.hidden, in = input_width(), D = 2 * cfg_.k;
  switch (cfg_.kind) {
    case Kind::lstm:
      for (std::size_t l = 0; l < cfg_.layers; ++l) {
        add_linear(s, "lstm.l" + std::to_string(l), (l == 0 ? in : H) + H, 4 * H, rng);
      }
      add_linear(s, "head", H, cfg_.q * D, rng);
      break;
    case Kind::transformer:
      add_linear(s, "embed", in, H, rng);
      for (std::size_t l = 0; l < cfg_.layers; ++l) {
        const auto pre = "enc." + std::to_string(l);
        add_layer_norm(s, pre + ".ln_1", H);
        model::add_attention(s, pre + ".attn", H, rng);
        add_layer_norm(s, pre + ".ln_2", H);
        add_linear(s, pre + ".fc", H, 4 * H, rng);
        add_linear(s, pre + ".proj", 4 * H, H, rng);
      }
      add_linear(s, "temporal", cfg_.p, cfg_.q, rng);
      add_linear(s, "head", H, D, rng);
      break;
    case Kind::cnn: {
      // channel growth: in -> H -> 2H -> ... -> 2H, then a 1x1 map to the two planes
      std::size_t c_in = in;
      for (std::size_t l = 0; l < cfg_.layers; ++l) {
        const std::size_t c_out = l == 0 ? H : 2 * H;
        add_conv(s, "conv" + std::to_string(l), c_out, c_in, cfg_.kernel, cfg_.kernel, rng);
        c_in = c_out;
      }
      add_conv(s, "to_planes", 2, c_in, 1, 1, rng);
      add_linear(s, "temporal", cfg_.p, cfg_.q, rng);
      break;
    }
  }
  return s;
}

template <typename T>
Var<T> Baseline::lstm(Graph<T>& g, const ParamStore<T>& s, Var<T> tokens) const {
  const std::size_t B = tokens.shape()[0], H = cfg_.hidden;
  std::vector<Var<T>> seq;
  for (std::size_t t = 0; t < cfg_.p; ++t) seq.push_back(num::reshape(num::slice(tokens, 1, t, 1), {B, input_width()}));
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    auto h = g.constant(Tensor<T>::zeros({B, H}));
    auto c = h;
    for (auto& x : seq) {
      auto gates = linear_p(g, s, "lstm.l" + std::to_string(l), num::concat<T>({x, h}, 1));
      auto i = num::sigmoid(num::slice(gates, 1, 0, H));
      auto f = num::sigmoid(num::slice(gates, 1, H, H));
      auto o = num::sigmoid(num::slice(gates, 1, 2 * H, H));
      auto cand = num::tanh(num::slice(gates, 1, 3 * H, H));
      c = num::add(num::mul(f, c), num::mul(i, cand));
      h = num::mul(o, num::tanh(c));
      x = h;  // becomes the next layer's input
    }
  }
  return num::reshape(linear_p(g, s, "head", seq.back()), {B, cfg_.q, 2, cfg_.k});
}

template <typename T>
Var<T> Baseline::transformer(Graph<T>& g, const ParamStore<T>& s, Var<T> tokens, std::vector<Var<T>>* weights) const {
  const std::size_t B = tokens.shape()[0];
  auto x = num::add(linear_p(g, s, "embed", tokens), g.constant(model::sinusoidal_encoding<T>(cfg_.p, cfg_.hidden)));
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const auto pre = "enc." + std::to_string(l);
    auto a = layer_norm_p(g, s, pre + ".ln_1", x);
    Var<T> w;
    x = num::add(x, model::attention_p(g, s, pre + ".attn", a, a, cfg_.heads, false, &w));
    if (weights) weights->push_back(w);
    auto m = layer_norm_p(g, s, pre + ".ln_2", x);
    x = num::add(x, linear_p(g, s, pre + ".proj", num::gelu(linear_p(g, s, pre + ".fc", m))));
  }
  auto over_time = linear_p(g, s, "temporal", num::permute(x, {0, 2, 1}));  // [B, H, Q]
  auto y = linear_p(g, s, "head", num::permute(over_time, {0, 2, 1}));      // [B, Q, 2K]
  return num::reshape(y, {B, cfg_.q, 2, cfg_.k});
}

template <typename T>
Var<T> Baseline::cnn(Graph<T>& g, const ParamStore<T>& s, Var<T> planes) const {
  auto x = planes;  // [B, C, K, P]
  for (std::size_t l = 0; l < cfg_.layers; ++l) x = num::gelu(conv_p(g, s, "conv" + std::to_string(l), x));
  auto y = linear_p(g, s, "temporal", conv_p(g, s, "to_planes", x));  // [B, 2, K, Q]
  return num::permute(y, {0, 3, 1, 2});
}

template <typename T>
Var<T> Baseline::run_with_attention(Graph<T>& g, const ParamStore<T>& s, const Batch<T>& b,
                                    std::vector<Var<T>>* weights) const {
  if (b.k != cfg_.k || b.p != cfg_.p || b.q != cfg_.q) throw ConfigError("batch window does not match baseline config");
  std::vector<Var<T>> views{g.constant(b.c_freq), g.constant(b.c_delay)};
  if (cfg_.use_sensing) {
    views.push_back(g.constant(b.s_freq));
    views.push_back(g.constant(b.s_delay));
  }
  Var<T> y;
  if (cfg_.kind == Kind::cnn) {
    y = cnn(g, s, num::concat(views, 1));
  } else {
    std::vector<Var<T>> tokens;
    for (auto& v : views) tokens.push_back(model::planes_to_tokens(v));
    auto seq = num::concat(tokens, 2);  // [B, P, input_width]
    y = cfg_.kind == Kind::lstm ? lstm(g, s, seq) : transformer(g, s, seq, weights);
  }
  return num::batch_affine(y, b.sigma, b.mu);
}

template <typename T>
Var<T> Baseline::run(Graph<T>& g, const ParamStore<T>& s, const Batch<T>& b) const {
  return run_with_attention<T>(g, s, b, nullptr);
}

BaselineConfig size_to_budget(BaselineConfig config, std::size_t target) {
  const std::size_t step = config.kind == Kind::transformer ? config.heads : 1;
  BaselineConfig best = config;
  std::size_t best_gap = static_cast<std::size_t>(-1);
  for (std::size_t h = step; h <= 512; h += step) {
    config.hidden = h;
    const std::size_t n = Baseline(config).init_params(0).count();
    const std::size_t gap = n > target ? n - target : target - n;
    if (gap < best_gap) {
      best_gap = gap;
      best = config;
    }
    if (n > target) break;
  }
  return best;
}

#define ISAC_INSTANTIATE_BASELINE(T)                                                                            \
  template Var<T> Baseline::run<T>(Graph<T>&, const ParamStore<T>&, const Batch<T>&) const;                     \
  template Var<T> Baseline::run_with_attention<T>(Graph<T>&, const ParamStore<T>&, const Batch<T>&,             \
                                                  std::vector<Var<T>>*) const;

ISAC_INSTANTIATE_BASELINE(float)
ISAC_INSTANTIATE_BASELINE(double)

}  // namespace isac::baselines
