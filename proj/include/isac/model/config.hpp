// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>

namespace isac::model {

enum class FusionMode {
  cross_qkv,          // query = comm, key/value = sensing, residual on comm
  sum_then_selfattn,  // self-attention over the sum of both streams, residual on the sum
};

std::string to_string(FusionMode mode);
FusionMode fusion_mode_from_string(const std::string& name);

struct ModelConfig {
  std::size_t k = 16;  // subcarriers
  std::size_t p = 10;  // historical slots
  std::size_t q = 5;   // predicted slots

  std::size_t features = 64;  // backbone width
  std::size_t layers = 2;
  std::size_t heads = 4;

  std::size_t hidden_channels = 8;  // ConvLSTM hidden channels
  std::size_t sense_depth = 2;      // cascaded ConvLSTM blocks, sensing stream
  std::size_t comm_depth = 2;       // cascaded ConvLSTM blocks, comm stream
  std::size_t kernel = 3;           // ConvLSTM kernel height (width is 1)

  std::size_t fusion_heads = 4;
  FusionMode fusion_mode = FusionMode::cross_qkv;
  bool causal = true;

  bool use_sensing = true;
  bool use_channel_attention = true;
  bool use_cross_attention = true;
  bool use_backbone = true;

  /// Width of one slot token entering fusion: real and imaginary planes of K subcarriers.
  std::size_t token_dim() const { return 2 * k; }
  void validate() const;
};

/// Trainable + frozen parameter count, closed form.
std::size_t parameter_count(const ModelConfig& config);

}  // namespace isac::model
