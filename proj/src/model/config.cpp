// SPDX-License-Identifier: Apache-2.0
#include "isac/model/config.hpp"

#include "isac/errors.hpp"

namespace isac::model {

std::string to_string(FusionMode mode) {
  return mode == FusionMode::cross_qkv ? "cross_qkv" : "sum_then_selfattn";
}

FusionMode fusion_mode_from_string(const std::string& name) {
  if (name == "cross_qkv") return FusionMode::cross_qkv;
  if (name == "sum_then_selfattn") return FusionMode::sum_then_selfattn;
  throw ConfigError("unknown fusion_mode '" + name + "'");
}

void ModelConfig::validate() const {
  if (k < 1 || p < 1 || q < 1) throw ConfigError("K, P and Q must be at least 1");
  if (features < 1 || heads < 1 || hidden_channels < 1 || fusion_heads < 1) {
    throw ConfigError("model widths and head counts must be at least 1");
  }
  if (sense_depth < 1 || comm_depth < 1) throw ConfigError("channel-attention depth must be at least 1");
  if (features % heads != 0) throw ConfigError("features must be divisible by heads");
  if (token_dim() % fusion_heads != 0) throw ConfigError("2K must be divisible by fusion_heads");
  if (kernel % 2 == 0) throw ConfigError("ConvLSTM kernel size must be odd");
}

std::size_t parameter_count(const ModelConfig& c) {
  const std::size_t h = c.hidden_channels, F = c.features, D = c.token_dim();
  auto stream = [&](std::size_t depth) {
    const std::size_t lift = 4 * h + h;
    const std::size_t block = 4 * h * (2 * h) * c.kernel + 4 * h;
    const std::size_t proj = 2 * h + 2;
    const std::size_t skip = 2 * 4 + 2;
    return lift + depth * block + proj + skip;
  };
  std::size_t n = 0;
  if (c.use_channel_attention) n += stream(c.comm_depth) + stream(c.sense_depth);
  if (c.use_cross_attention) n += 4 * (D * D + D);
  n += D * F + F;
  if (c.use_backbone) n += c.p * F + c.layers * (12 * F * F + 13 * F);
  n += c.p * c.q + c.q + F * D + D;
  return n;
}

}  // namespace isac::model
