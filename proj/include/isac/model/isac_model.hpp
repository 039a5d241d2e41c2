// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

#include "isac/model/config.hpp"
#include "isac/model/layers.hpp"
#include "isac/model/predictor.hpp"
#include "isac/numerics/archive.hpp"

namespace isac::model {

// Parameter name prefixes.
inline constexpr const char* kCommAttention = "ca_comm";
inline constexpr const char* kSenseAttention = "ca_sense";
inline constexpr const char* kFusion = "fusion";
inline constexpr const char* kEmbed = "embed";
inline constexpr const char* kBackbone = "backbone";
inline constexpr const char* kHead = "head";

/// Sensing-assisted predictor: per-stream ConvLSTM channel attention, attention
/// fusion, slot embedding, causal transformer backbone and a de-normalizing head.
class IsacModel : public PredictorBase<IsacModel> {
 public:
  explicit IsacModel(ModelConfig config);

  std::string name() const override { return "proposed"; }
  std::size_t k() const override { return cfg_.k; }
  std::size_t p() const override { return cfg_.p; }
  std::size_t q() const override { return cfg_.q; }
  const ModelConfig& config() const { return cfg_; }

  ParamStore<double> init_params(std::uint64_t seed) const override;

  template <typename T>
  Var<T> run(Graph<T>& g, const ParamStore<T>& s, const Batch<T>& batch) const;

  // Stages, exposed for inspection and tests.

  /// delay, freq: [B, 2, K, P] -> slot tokens [B, P, 2K]. Lifts concat(delay, freq) to
  /// the hidden width with a 1x1 convolution, runs `depth` residual ConvLSTM blocks over
  /// the P slots, projects back to 2 channels and adds a 1x1 skip projection of the input.
  template <typename T>
  Var<T> channel_attention(Graph<T>& g, const ParamStore<T>& s, const std::string& prefix, Var<T> delay, Var<T> freq,
                           std::size_t depth) const;

  /// comm, sense: [B, P, 2K] -> [B, P, 2K].
  template <typename T>
  Var<T> fuse(Graph<T>& g, const ParamStore<T>& s, Var<T> comm, Var<T> sense, Var<T>* weights = nullptr) const;

  /// [B, P, 2K] -> [B, P, F]: one linear map per token plus the fixed sinusoidal encoding.
  template <typename T>
  Var<T> embed(Graph<T>& g, const ParamStore<T>& s, Var<T> tokens) const;

  /// [B, P, F] -> [B, P, F]: learnable positional embedding, then pre-norm decoder blocks.
  template <typename T>
  Var<T> backbone(Graph<T>& g, const ParamStore<T>& s, Var<T> x, std::vector<Var<T>>* attn_weights = nullptr) const;

  /// [B, P, F] -> [B, Q, 2, K]: temporal map P->Q, per-slot map F->2K, de-normalization.
  template <typename T>
  Var<T> output_head(Graph<T>& g, const ParamStore<T>& s, Var<T> x, const std::vector<T>& mu,
                     const std::vector<T>& sigma) const;

 private:
  ModelConfig cfg_;
};

/// Names of the backbone tensors for (F, L), in export order.
std::vector<std::string> backbone_tensor_names(const ModelConfig& config);

/// True for backbone attention and feed-forward projection tensors.
bool is_backbone_attention_or_ffn(const std::string& name);

/// Backbone tensors of `params` as an archive.
template <typename T>
num::TensorArchive export_backbone(const ParamStore<T>& params, const ModelConfig& config);

/// Overwrites backbone tensors from an archive. Names follow backbone_tensor_names();
/// GPT-2 style names without the "backbone." prefix (optionally under "transformer.")
/// are accepted, and tensors listed as ignored in the mapping table are skipped. The
/// positional table may have more rows than P; the first P are used. Throws ImportError
/// listing every offending tensor.
template <typename T>
void import_backbone(ParamStore<T>& params, const ModelConfig& config, const num::TensorArchive& archive);

template <typename T>
void import_backbone_weights(const std::filesystem::path& path, ParamStore<T>& params, const ModelConfig& config) {
  import_backbone(params, config, num::TensorArchive::load(path));
}

}  // namespace isac::model
