// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "isac/baselines/baselines.hpp"
#include "isac/channel/dataset.hpp"
#include "isac/model/isac_model.hpp"
#include "isac/train/loss.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace isac;
using namespace isac::baselines;
using namespace isac::testing;
using model::Batch;
using num::Shape;

namespace {

BaselineConfig tiny(Kind kind, bool sensing = true) {
  BaselineConfig c;
  c.kind = kind;
  c.k = 4;
  c.p = 3;
  c.q = 2;
  c.hidden = kind == Kind::cnn ? 2 : 4;
  c.layers = 2;
  c.heads = 2;
  c.use_sensing = sensing;
  return c;
}

Batch<double> random_batch(std::size_t k, std::size_t p, std::size_t q, std::size_t rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Batch<double> b;
  b.rows = rows;
  b.k = k;
  b.p = p;
  b.q = q;
  const Shape in{rows, 2, k, p};
  b.c_freq = random_tensor(in, rng);
  b.c_delay = random_tensor(in, rng);
  b.s_freq = random_tensor(in, rng);
  b.s_delay = random_tensor(in, rng);
  b.target = random_tensor({rows, q, 2, k}, rng);
  for (std::size_t r = 0; r < rows; ++r) {
    b.mu.push_back(0.2 * static_cast<double>(r) - 0.1);
    b.sigma.push_back(0.75 + 0.5 * static_cast<double>(r));
  }
  return b;
}

// Overwrite every parameter with random values so zero biases and unit norms do not hide terms.
ParamStore<double> randomized(ParamStore<double> s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  for (auto& p : s.params())
    for (auto& v : p.value.vec()) v = d(rng);
  return s;
}

// Value of view `v` (0 c_freq, 1 c_delay, 2 s_freq, 3 s_delay) at [row, plane, k, t].
double view(const Batch<double>& b, std::size_t v, std::size_t row, std::size_t plane, std::size_t k, std::size_t t) {
  const Tensor<double>* src[] = {&b.c_freq, &b.c_delay, &b.s_freq, &b.s_delay};
  return (*src[v])[((row * 2 + plane) * b.k + k) * b.p + t];
}

const Kind kAllKinds[] = {Kind::lstm, Kind::transformer, Kind::cnn};

}  // namespace

TEST_CASE("baseline outputs are [B, Q, 2, K] for every kind and sensing flag") {
  for (Kind kind : kAllKinds)
    for (bool sensing : {false, true}) {
      Baseline m(tiny(kind, sensing));
      const auto s = m.init_params(3);
      const auto b = random_batch(4, 3, 2, 3, 4);
      Graph<double> g;
      CHECK(m.forward(g, s, b).shape() == Shape{3, 2, 2, 4});
    }
}

TEST_CASE("sequence baselines read 2*2K or 2*4K features per slot") {
  for (Kind kind : {Kind::lstm, Kind::transformer}) {
    auto c = tiny(kind, false);
    CHECK(Baseline(c).input_width() == 2 * 2 * c.k);
    c.use_sensing = true;
    CHECK(Baseline(c).input_width() == 2 * 4 * c.k);
  }
  auto c = tiny(Kind::lstm);
  const auto s = Baseline(c).init_params(1);
  CHECK(s.at("lstm.l0.weight").value.shape() == Shape{2 * 4 * c.k + c.hidden, 4 * c.hidden});
  CHECK(s.at("lstm.l1.weight").value.shape() == Shape{2 * c.hidden, 4 * c.hidden});
  CHECK(s.at("head.weight").value.shape() == Shape{c.hidden, 2 * c.k * c.q});
  CHECK(Baseline(tiny(Kind::cnn, false)).input_width() == 4);
  CHECK(Baseline(tiny(Kind::cnn, true)).input_width() == 8);
}

TEST_CASE("baseline gradients match finite differences") {
  for (Kind kind : kAllKinds)
    for (bool sensing : {false, true}) {
      Baseline m(tiny(kind, sensing));
      const auto s = randomized(m.init_params(5), 6);
      const auto b = random_batch(4, 3, 2, 2, 7);
      auto res = param_gradcheck(s, [&](Graph<double>& g, const ParamStore<double>& ps) {
        return train::nmse_loss(m.forward(g, ps, b), b.target);
      });
      INFO(m.name() << " worst " << res.worst);
      CHECK(res.max_rel_error < 1e-4);
      CHECK(res.tensors == s.size());
    }
}

TEST_CASE("no-sensing baselines ignore the sensing views") {
  for (Kind kind : kAllKinds) {
    Baseline m(tiny(kind, false));
    const auto s = m.init_params(8);
    auto b = random_batch(4, 3, 2, 2, 9);
    Graph<double> g1;
    const auto a = m.forward(g1, s, b).value();
    std::mt19937_64 rng(10);
    b.s_freq = random_tensor(b.s_freq.shape(), rng);
    b.s_delay = random_tensor(b.s_delay.shape(), rng);
    Graph<double> g2;
    CHECK(m.forward(g2, s, b).value() == a);
  }
}

TEST_CASE("transformer attention rows are normalized") {
  Baseline m(tiny(Kind::transformer));
  const auto s = randomized(m.init_params(11), 12);
  const auto b = random_batch(4, 3, 2, 2, 13);
  Graph<double> g;
  std::vector<Var<double>> w;
  m.run_with_attention(g, s, b, &w);
  REQUIRE(w.size() == 2);
  for (const auto& layer : w) {
    const auto& t = layer.value();
    CHECK(t.shape() == Shape{2, 2, 3, 3});
    for (std::size_t r = 0; r < t.size() / 3; ++r) {
      double row = 0;
      for (std::size_t j = 0; j < 3; ++j) {
        CHECK(t[r * 3 + j] >= 0.0);
        row += t[r * 3 + j];
      }
      CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("transformer matches a brute-force loop forward pass") {
  auto c = tiny(Kind::transformer);
  c.layers = 1;
  Baseline m(c);
  const auto s = randomized(m.init_params(14), 15);
  const auto b = random_batch(c.k, c.p, c.q, 2, 16);
  Graph<double> g;
  const auto out = m.forward(g, s, b).value();

  const std::size_t K = c.k, P = c.p, Q = c.q, H = c.hidden, in = 8 * K;
  auto at = [&](const std::string& n) -> const Tensor<double>& { return s.at(n).value; };
  Tensor<double> expect({2, Q, 2, K});
  for (std::size_t r = 0; r < 2; ++r) {
    Mat x(P * in);
    for (std::size_t t = 0; t < P; ++t)
      for (std::size_t v = 0; v < 4; ++v)
        for (std::size_t pl = 0; pl < 2; ++pl)
          for (std::size_t k = 0; k < K; ++k) x[t * in + v * 2 * K + pl * K + k] = view(b, v, r, pl, k, t);
    Mat e = affine(x, P, in, at("embed.weight"), at("embed.bias"));
    for (std::size_t t = 0; t < P; ++t)
      for (std::size_t j = 0; j < H; ++j) {
        const double arg = static_cast<double>(t) / std::pow(10000.0, static_cast<double>(j - j % 2) / static_cast<double>(H));
        e[t * H + j] += j % 2 == 0 ? std::sin(arg) : std::cos(arg);
      }
    const Mat a = layer_norm_loop(e, P, H, at("enc.0.ln_1.weight"), at("enc.0.ln_1.bias"));
    const Mat att = attention_loop(affine(a, P, H, at("enc.0.attn.q.weight"), at("enc.0.attn.q.bias")),
                                   affine(a, P, H, at("enc.0.attn.k.weight"), at("enc.0.attn.k.bias")),
                                   affine(a, P, H, at("enc.0.attn.v.weight"), at("enc.0.attn.v.bias")), P, P, H,
                                   c.heads, false);
    const Mat o = affine(att, P, H, at("enc.0.attn.o.weight"), at("enc.0.attn.o.bias"));
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += o[i];
    Mat f = affine(layer_norm_loop(e, P, H, at("enc.0.ln_2.weight"), at("enc.0.ln_2.bias")), P, H,
                   at("enc.0.fc.weight"), at("enc.0.fc.bias"));
    for (auto& v : f) v = gelu_ref(v);
    const Mat pr = affine(f, P, 4 * H, at("enc.0.proj.weight"), at("enc.0.proj.bias"));
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += pr[i];
    Mat tq(Q * H);
    for (std::size_t qq = 0; qq < Q; ++qq)
      for (std::size_t h = 0; h < H; ++h) {
        double acc = at("temporal.bias")[qq];
        for (std::size_t t = 0; t < P; ++t) acc += e[t * H + h] * at("temporal.weight")[t * Q + qq];
        tq[qq * H + h] = acc;
      }
    const Mat y = affine(tq, Q, H, at("head.weight"), at("head.bias"));
    for (std::size_t i = 0; i < Q * 2 * K; ++i) expect[r * Q * 2 * K + i] = y[i] * b.sigma[r] + b.mu[r];
  }
  CHECK(max_diff(out, expect) < 1e-10);
}

TEST_CASE("CNN with zero input and zero biases returns zero before de-normalization") {
  Baseline m(tiny(Kind::cnn));
  auto s = m.init_params(17);
  for (auto& p : s.params())
    if (p.name.ends_with(".bias")) p.value.fill(0.0);
  auto b = random_batch(4, 3, 2, 2, 18);
  for (auto* t : {&b.c_freq, &b.c_delay, &b.s_freq, &b.s_delay}) t->fill(0.0);
  b.mu.assign(2, 0.0);
  b.sigma.assign(2, 1.0);
  Graph<double> g;
  const auto y = m.forward(g, s, b).value();
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.0);
}

TEST_CASE("CNN matches composed direct-summation convolutions") {
  auto c = tiny(Kind::cnn);
  c.k = 5;
  c.p = 4;
  c.q = 3;
  Baseline m(c);
  const auto s = randomized(m.init_params(19), 20);
  const auto b = random_batch(c.k, c.p, c.q, 2, 21);
  Graph<double> g;
  const auto out = m.forward(g, s, b).value();

  const std::size_t K = c.k, P = c.p, Q = c.q;
  // x[ch][k][t] per row, 'same' zero padding
  using Planes = std::vector<Mat>;
  auto conv = [&](const Planes& x, const std::string& name) {
    const auto& w = s.at(name + ".weight").value;
    const auto& bias = s.at(name + ".bias").value;
    const std::size_t co = w.dim(0), ci = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    Planes y(co, Mat(K * P));
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = 0; j < P; ++j) {
          double acc = bias[o];
          for (std::size_t ch = 0; ch < ci; ++ch)
            for (std::size_t u = 0; u < kh; ++u)
              for (std::size_t v = 0; v < kw; ++v) {
                const long ii = static_cast<long>(i + u) - static_cast<long>(kh / 2);
                const long jj = static_cast<long>(j + v) - static_cast<long>(kw / 2);
                if (ii < 0 || jj < 0 || ii >= static_cast<long>(K) || jj >= static_cast<long>(P)) continue;
                acc += w[((o * ci + ch) * kh + u) * kw + v] * x[ch][static_cast<std::size_t>(ii) * P + static_cast<std::size_t>(jj)];
              }
          y[o][i * P + j] = acc;
        }
    return y;
  };
  Tensor<double> expect({2, Q, 2, K});
  for (std::size_t r = 0; r < 2; ++r) {
    Planes x;
    for (std::size_t v = 0; v < 4; ++v)
      for (std::size_t pl = 0; pl < 2; ++pl) {
        Mat plane(K * P);
        for (std::size_t k = 0; k < K; ++k)
          for (std::size_t t = 0; t < P; ++t) plane[k * P + t] = view(b, v, r, pl, k, t);
        x.push_back(plane);
      }
    for (std::size_t l = 0; l < c.layers; ++l) {
      x = conv(x, "conv" + std::to_string(l));
      for (auto& plane : x)
        for (auto& v : plane) v = gelu_ref(v);
    }
    x = conv(x, "to_planes");
    const auto& wt = s.at("temporal.weight").value;
    const auto& bt = s.at("temporal.bias").value;
    for (std::size_t qq = 0; qq < Q; ++qq)
      for (std::size_t pl = 0; pl < 2; ++pl)
        for (std::size_t k = 0; k < K; ++k) {
          double acc = bt[qq];
          for (std::size_t t = 0; t < P; ++t) acc += x[pl][k * P + t] * wt[t * Q + qq];
          expect[((r * Q + qq) * 2 + pl) * K + k] = acc * b.sigma[r] + b.mu[r];
        }
  }
  CHECK(max_diff(out, expect) < 1e-10);
}

TEST_CASE("budget sizing lands within 25 percent of the main model's trainable count") {
  model::ModelConfig mc;  // desk scale
  const auto full = model::IsacModel(mc).init_params(1);
  std::size_t trainable = 0;
  for (const auto& p : full.params())
    if (!model::is_backbone_attention_or_ffn(p.name)) trainable += p.value.size();
  REQUIRE(trainable > 0);
  for (Kind kind : kAllKinds)
    for (bool sensing : {false, true}) {
      BaselineConfig c;
      c.kind = kind;
      c.use_sensing = sensing;
      c = size_to_budget(c, trainable);
      const auto n = static_cast<double>(Baseline(c).init_params(1).count());
      INFO(to_string(kind) << " sensing=" << sensing << " hidden=" << c.hidden << " params=" << n);
      CHECK(n >= 0.75 * static_cast<double>(trainable));
      CHECK(n <= 1.25 * static_cast<double>(trainable));
    }
}

TEST_CASE("baseline predict runs per antenna on generated windows") {
  channel::DatasetConfig dc;
  dc.scenario.grid.k = 8;
  dc.scenario.n_v = 1;
  dc.scenario.n_h = 2;
  dc.p = 4;
  dc.q = 2;
  const auto data = channel::generate_dataset(dc, 1, 22);
  BaselineConfig c;
  c.kind = Kind::transformer;
  c.k = 8;
  c.p = 4;
  c.q = 2;
  c.hidden = 8;
  Baseline m(c);
  const auto out = model::predict(m, m.init_params(23).cast<float>(), data.samples[0]);
  CHECK(out.shape() == Shape{2, 8, 2});
  c.k = 16;
  Baseline wrong(c);
  CHECK_THROWS_AS(model::predict(wrong, wrong.init_params(1).cast<float>(), data.samples[0]), ConfigError);
}

TEST_CASE("invalid baseline configs are rejected") {
  auto c = tiny(Kind::lstm);
  c.hidden = 0;
  CHECK_THROWS_AS(Baseline{c}, ConfigError);
  c = tiny(Kind::transformer);
  c.hidden = 5;
  CHECK_THROWS_AS(Baseline{c}, ConfigError);
  c = tiny(Kind::cnn);
  c.kernel = 2;
  CHECK_THROWS_AS(Baseline{c}, ConfigError);
  CHECK_THROWS_AS(kind_from_string("gru"), ConfigError);
  CHECK(kind_from_string("cnn") == Kind::cnn);
}
