// SPDX-License-Identifier: Apache-2.0
// Parameterized building blocks. Each block reads its tensors from a ParamStore
// under a name prefix; the matching add_* function creates them.
#pragma once

#include <string>

#include "isac/numerics/autodiff.hpp"
#include "isac/numerics/random.hpp"

namespace isac::model {

using num::Graph;
using num::ParamStore;
using num::Tensor;
using num::Var;

// ---- parameter creation (always 64-bit; cast for training) --------------------

/// prefix.weight [in, out] (Glorot), prefix.bias [out] (zeros).
void add_linear(ParamStore<double>& s, const std::string& prefix, std::size_t in, std::size_t out, num::Rng& rng);
/// prefix.weight [cout, cin, kh, kw] (Glorot), prefix.bias [cout] (zeros).
void add_conv(ParamStore<double>& s, const std::string& prefix, std::size_t cout, std::size_t cin, std::size_t kh,
              std::size_t kw, num::Rng& rng);
/// prefix.weight [n] (ones), prefix.bias [n] (zeros).
void add_layer_norm(ParamStore<double>& s, const std::string& prefix, std::size_t n);

/// Gate convolution of one ConvLSTM cell: prefix.gates.{weight,bias}, 4*hidden outputs.
void add_convlstm(ParamStore<double>& s, const std::string& prefix, std::size_t in_channels, std::size_t hidden,
                  std::size_t kernel, num::Rng& rng);
/// Q/K/V/output projections of width d: prefix.{q,k,v,o}.{weight,bias}.
void add_attention(ParamStore<double>& s, const std::string& prefix, std::size_t d, num::Rng& rng);

// ---- forward ---------------------------------------------------------------

template <typename T>
Var<T> linear_p(Graph<T>& g, const ParamStore<T>& s, const std::string& prefix, Var<T> x);
template <typename T>
Var<T> conv_p(Graph<T>& g, const ParamStore<T>& s, const std::string& prefix, Var<T> x);
template <typename T>
Var<T> layer_norm_p(Graph<T>& g, const ParamStore<T>& s, const std::string& prefix, Var<T> x);

template <typename T>
struct ConvLstmState {
  Var<T> h;  // [B, hidden, K, 1]
  Var<T> c;
};

template <typename T>
ConvLstmState<T> zero_state(Graph<T>& g, std::size_t batch, std::size_t hidden, std::size_t height);

/// One ConvLSTM step. x: [B, C_in, K, 1]. Gates (input, forget, output, candidate)
/// come from one convolution over concat(x, h) along channels.
template <typename T>
ConvLstmState<T> convlstm_cell(Graph<T>& g, const ParamStore<T>& s, const std::string& prefix, Var<T> x,
                               const ConvLstmState<T>& state);

/// Runs a cell over the last axis of x: [B, C, K, P]; returns the hidden sequence [B, hidden, K, P].
template <typename T>
Var<T> convlstm_sequence(Graph<T>& g, const ParamStore<T>& s, const std::string& prefix, Var<T> x, std::size_t hidden);

/// Scaled dot-product attention split over `heads`. q: [B, Pq, D]; k, v: [B, Pk, D].
/// Returns [B, Pq, D]; the [B, heads, Pq, Pk] weights are written to `weights` if given.
template <typename T>
Var<T> attend(Var<T> q, Var<T> k, Var<T> v, std::size_t heads, bool causal, Var<T>* weights = nullptr);

/// Projected multi-head attention with output projection (no residual).
template <typename T>
Var<T> attention_p(Graph<T>& g, const ParamStore<T>& s, const std::string& prefix, Var<T> query, Var<T> context,
                   std::size_t heads, bool causal, Var<T>* weights = nullptr);

/// Fixed sinusoidal encoding [P, F]: even columns sin(p / 10000^(2i/F)), odd columns cos.
template <typename T>
Tensor<T> sinusoidal_encoding(std::size_t positions, std::size_t features);

/// [B, 2, K, P] -> [B, P, 2K] slot tokens.
template <typename T>
Var<T> planes_to_tokens(Var<T> x);

}  // namespace isac::model
