// SPDX-License-Identifier: Apache-2.0
#include "isac/model/isac_model.hpp"

#include <set>

namespace isac::model {
namespace {

constexpr double kHeadInitGain = 0.1;

std::string layer_prefix(std::size_t l) { return std::string(kBackbone) + ".h." + std::to_string(l); }

void add_stream(ParamStore<double>& s, const std::string& prefix, const ModelConfig& c, std::size_t depth,
                num::Rng& rng) {
  const std::size_t h = c.hidden_channels;
  add_conv(s, prefix + ".lift", h, 4, 1, 1, rng);
  for (std::size_t d = 0; d < depth; ++d) add_convlstm(s, prefix + ".block" + std::to_string(d), h, h, c.kernel, rng);
  add_conv(s, prefix + ".proj", 2, h, 1, 1, rng);
  add_conv(s, prefix + ".skip", 2, 4, 1, 1, rng);
}

}  // namespace

IsacModel::IsacModel(ModelConfig config) : cfg_(std::move(config)) { cfg_.validate(); }

ParamStore<double> IsacModel::init_params(std::uint64_t seed) const {
  ParamStore<double> s;
  num::Rng rng(seed);
  const std::size_t D = cfg_.token_dim(), F = cfg_.features;
  if (cfg_.use_channel_attention) {
    add_stream(s, kCommAttention, cfg_, cfg_.comm_depth, rng);
    add_stream(s, kSenseAttention, cfg_, cfg_.sense_depth, rng);
  }
  if (cfg_.use_cross_attention) add_attention(s, kFusion, D, rng);
  add_linear(s, kEmbed, D, F, rng);
  if (cfg_.use_backbone) {
    // GPT-2 initializes positional embeddings with small Gaussian noise.
    Tensor<double> wpe({cfg_.p, F});
    for (auto& v : wpe.vec()) v = 0.01 * num::gaussian(rng);
    s.add(std::string(kBackbone) + ".wpe.weight", std::move(wpe));
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      const auto pre = layer_prefix(l);
      add_layer_norm(s, pre + ".ln_1", F);
      add_linear(s, pre + ".attn.c_attn", F, 3 * F, rng);
      add_linear(s, pre + ".attn.c_proj", F, F, rng);
      add_layer_norm(s, pre + ".ln_2", F);
      add_linear(s, pre + ".mlp.c_fc", F, 4 * F, rng);
      add_linear(s, pre + ".mlp.c_proj", 4 * F, F, rng);
    }
  }
  add_linear(s, std::string(kHead) + ".temporal", cfg_.p, cfg_.q, rng);
  add_linear(s, std::string(kHead) + ".out", F, D, rng);
  // Small final projection so an untrained model predicts close to the window mean.
  for (auto& v : s.at(std::string(kHead) + ".out.weight").value.vec()) v *= kHeadInitGain;
  return s;
}

template <typename T>
Var<T> IsacModel::channel_attention(Graph<T>& g, const ParamStore<T>& s, const std::string& prefix, Var<T> delay,
                                    Var<T> freq, std::size_t depth) const {
  auto x = num::concat<T>({delay, freq}, 1);  // [B, 4, K, P]
  auto z = conv_p(g, s, prefix + ".lift", x);
  for (std::size_t d = 0; d < depth; ++d) {
    z = num::add(z, convlstm_sequence(g, s, prefix + ".block" + std::to_string(d), z, cfg_.hidden_channels));
  }
  auto out = num::add(conv_p(g, s, prefix + ".proj", z), conv_p(g, s, prefix + ".skip", x));
  return planes_to_tokens(out);
}

template <typename T>
Var<T> IsacModel::fuse(Graph<T>& g, const ParamStore<T>& s, Var<T> comm, Var<T> sense, Var<T>* weights) const {
  if (comm.shape() != sense.shape()) throw DimensionError("fuse: stream shapes differ");
  if (!cfg_.use_cross_attention) return num::add(comm, sense);
  if (cfg_.fusion_mode == FusionMode::cross_qkv) {
    return num::add(comm, attention_p(g, s, kFusion, comm, sense, cfg_.fusion_heads, false, weights));
  }
  auto mixed = num::add(comm, sense);
  return num::add(mixed, attention_p(g, s, kFusion, mixed, mixed, cfg_.fusion_heads, false, weights));
}

template <typename T>
Var<T> IsacModel::embed(Graph<T>& g, const ParamStore<T>& s, Var<T> tokens) const {
  auto pe = g.constant(sinusoidal_encoding<T>(tokens.shape()[1], cfg_.features));
  return num::add(linear_p(g, s, kEmbed, tokens), pe);
}

template <typename T>
Var<T> IsacModel::backbone(Graph<T>& g, const ParamStore<T>& s, Var<T> x, std::vector<Var<T>>* attn_weights) const {
  const std::size_t F = cfg_.features;
  x = num::add(x, g.parameter(s, std::string(kBackbone) + ".wpe.weight"));
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const auto pre = layer_prefix(l);
    auto a = layer_norm_p(g, s, pre + ".ln_1", x);
    auto qkv = linear_p(g, s, pre + ".attn.c_attn", a);
    Var<T> w;
    auto ctx = attend(num::slice(qkv, 2, 0, F), num::slice(qkv, 2, F, F), num::slice(qkv, 2, 2 * F, F), cfg_.heads,
                      cfg_.causal, &w);
    if (attn_weights) attn_weights->push_back(w);
    x = num::add(x, linear_p(g, s, pre + ".attn.c_proj", ctx));
    auto m = layer_norm_p(g, s, pre + ".ln_2", x);
    x = num::add(x, linear_p(g, s, pre + ".mlp.c_proj", num::gelu(linear_p(g, s, pre + ".mlp.c_fc", m))));
  }
  return x;
}

template <typename T>
Var<T> IsacModel::output_head(Graph<T>& g, const ParamStore<T>& s, Var<T> x, const std::vector<T>& mu,
                              const std::vector<T>& sigma) const {
  const std::size_t B = x.shape()[0];
  auto over_time = linear_p(g, s, std::string(kHead) + ".temporal", num::permute(x, {0, 2, 1}));  // [B, F, Q]
  auto y = linear_p(g, s, std::string(kHead) + ".out", num::permute(over_time, {0, 2, 1}));      // [B, Q, 2K]
  y = num::reshape(y, {B, cfg_.q, 2, cfg_.k});
  return num::batch_affine(y, sigma, mu);
}

template <typename T>
Var<T> IsacModel::run(Graph<T>& g, const ParamStore<T>& s, const Batch<T>& b) const {
  if (b.k != cfg_.k || b.p != cfg_.p || b.q != cfg_.q) throw ConfigError("batch window does not match model config");
  auto c_freq = g.constant(b.c_freq);
  auto c_delay = g.constant(b.c_delay);
  Var<T> s_freq, s_delay;
  if (cfg_.use_sensing) {
    s_freq = g.constant(b.s_freq);
    s_delay = g.constant(b.s_delay);
  } else {
    s_freq = g.constant(Tensor<T>::zeros(b.s_freq.shape()));
    s_delay = s_freq;
  }
  Var<T> fc, fs;
  if (cfg_.use_channel_attention) {
    fc = channel_attention(g, s, kCommAttention, c_delay, c_freq, cfg_.comm_depth);
    fs = channel_attention(g, s, kSenseAttention, s_delay, s_freq, cfg_.sense_depth);
  } else {
    fc = planes_to_tokens(c_freq);
    fs = planes_to_tokens(s_freq);
  }
  auto x = embed(g, s, fuse(g, s, fc, fs));
  if (cfg_.use_backbone) x = backbone(g, s, x);
  return output_head(g, s, x, b.mu, b.sigma);
}

std::vector<std::string> backbone_tensor_names(const ModelConfig& c) {
  std::vector<std::string> names{std::string(kBackbone) + ".wpe.weight"};
  for (std::size_t l = 0; l < c.layers; ++l) {
    for (const char* part : {".ln_1", ".attn.c_attn", ".attn.c_proj", ".ln_2", ".mlp.c_fc", ".mlp.c_proj"}) {
      names.push_back(layer_prefix(l) + part + ".weight");
      names.push_back(layer_prefix(l) + part + ".bias");
    }
  }
  return names;
}

bool is_backbone_attention_or_ffn(const std::string& name) {
  return name.rfind(std::string(kBackbone) + ".", 0) == 0 &&
         (name.find(".attn.") != std::string::npos || name.find(".mlp.") != std::string::npos);
}

template <typename T>
num::TensorArchive export_backbone(const ParamStore<T>& params, const ModelConfig& config) {
  num::TensorArchive a;
  for (const auto& n : backbone_tensor_names(config)) a.put(n, params.at(n).value);
  return a;
}

namespace {

bool ignored_gpt2_tensor(const std::string& name) {
  static const std::set<std::string> fixed{"backbone.wte.weight", "backbone.ln_f.weight", "backbone.ln_f.bias"};
  if (fixed.count(name)) return true;
  const auto ends = [&](const std::string& suf) {
    return name.size() > suf.size() && name.compare(name.size() - suf.size(), suf.size(), suf) == 0;
  };
  return name.rfind("backbone.h.", 0) == 0 && (ends(".attn.bias") || ends(".attn.masked_bias"));
}

std::string canonical_name(std::string name) {
  if (name.rfind("transformer.", 0) == 0) name = name.substr(12);
  if (name.rfind("backbone.", 0) != 0) name = "backbone." + name;
  return name;
}

}  // namespace

template <typename T>
void import_backbone(ParamStore<T>& params, const ModelConfig& config, const num::TensorArchive& archive) {
  const auto expected = backbone_tensor_names(config);
  const std::set<std::string> wanted(expected.begin(), expected.end());
  const std::string wpe = std::string(kBackbone) + ".wpe.weight";
  std::vector<std::string> offenders;
  std::vector<std::pair<std::string, Tensor<T>>> staged;
  std::set<std::string> seen;
  for (const auto& e : archive.entries()) {
    const auto name = canonical_name(e.name);
    if (ignored_gpt2_tensor(name)) continue;
    if (!wanted.count(name) || !params.contains(name)) {
      offenders.push_back(e.name + " (unknown)");
      continue;
    }
    seen.insert(name);
    const auto& want = params.at(name).value.shape();
    Tensor<T> value = archive.get<T>(e.name);
    if (name == wpe && value.rank() == 2 && value.dim(1) == want[1] && value.dim(0) > want[0]) {
      Tensor<T> head(want);
      std::copy_n(value.data().begin(), head.size(), head.data().begin());
      value = std::move(head);
    }
    if (value.shape() != want) {
      offenders.push_back(e.name + num::shape_str(e.shape) + "!=" + num::shape_str(want));
      continue;
    }
    staged.emplace_back(name, std::move(value));
  }
  for (const auto& n : expected) {
    if (!seen.count(n)) offenders.push_back(n + " (missing)");
  }
  if (!offenders.empty()) {
    std::string msg = "backbone import failed for " + std::to_string(offenders.size()) + " tensor(s):";
    for (const auto& o : offenders) msg += " " + o;
    throw ImportError(msg);
  }
  for (auto& [name, value] : staged) params.at(name).value = std::move(value);
}

#define ISAC_INSTANTIATE_MODEL(T)                                                                                    \
  template Var<T> IsacModel::run<T>(Graph<T>&, const ParamStore<T>&, const Batch<T>&) const;                         \
  template Var<T> IsacModel::channel_attention<T>(Graph<T>&, const ParamStore<T>&, const std::string&, Var<T>,       \
                                                  Var<T>, std::size_t) const;                                        \
  template Var<T> IsacModel::fuse<T>(Graph<T>&, const ParamStore<T>&, Var<T>, Var<T>, Var<T>*) const;               \
  template Var<T> IsacModel::embed<T>(Graph<T>&, const ParamStore<T>&, Var<T>) const;                                \
  template Var<T> IsacModel::backbone<T>(Graph<T>&, const ParamStore<T>&, Var<T>, std::vector<Var<T>>*) const;       \
  template Var<T> IsacModel::output_head<T>(Graph<T>&, const ParamStore<T>&, Var<T>, const std::vector<T>&,          \
                                            const std::vector<T>&) const;                                            \
  template num::TensorArchive export_backbone<T>(const ParamStore<T>&, const ModelConfig&);                          \
  template void import_backbone<T>(ParamStore<T>&, const ModelConfig&, const num::TensorArchive&);

ISAC_INSTANTIATE_MODEL(float)
ISAC_INSTANTIATE_MODEL(double)

}  // namespace isac::model
