// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "isac/numerics/param_store.hpp"
#include "isac/numerics/tensor.hpp"

namespace isac::num {

template <typename T>
class Graph;

/// Handle to a node on a Graph tape. Cheap to copy; valid while the graph lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* graph, std::size_t id) : graph_(graph), id_(id) {}

  const Tensor<T>& value() const;
  /// Gradient after backward(); zeros when nothing flowed into this node.
  const Tensor<T>& grad() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

  Graph<T>* graph() const { return graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

template <typename T>
struct Node {
  using Backward = std::function<void(Graph<T>&, std::size_t self)>;

  Tensor<T> value;
  Tensor<T> grad;  // empty until something accumulates into it
  std::string_view op;
  std::vector<std::size_t> parents;
  bool requires_grad = false;
  Backward backward;
};

/// Dynamic reverse-mode tape. Nodes are appended in creation order, which is a
/// topological order, so backward() is a single reverse sweep.
template <typename T>
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> constant(Tensor<T> value);
  Var<T> leaf(Tensor<T> value, bool requires_grad = true);

  /// Binds a stored parameter. Repeated calls with the same name return the same node.
  Var<T> parameter(const ParamStore<T>& store, const std::string& name);

  Var<T> make(std::string_view op, Tensor<T> value, std::vector<std::size_t> parents,
              typename Node<T>::Backward backward);

  Node<T>& node(std::size_t id) { return nodes_[id]; }
  const Node<T>& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient buffer of a node, allocated as zeros on first use.
  Tensor<T>& grad_buffer(std::size_t id);

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape backwards. Loss must hold one element.
  void backward(Var<T> loss);

  /// Number of nodes whose backward step ran during the last backward().
  std::size_t last_backward_visits() const { return visits_; }

  /// Adds bound-parameter gradients into `store` and marks them present.
  void accumulate_grads(ParamStore<T>& store) const;
  /// Adds bound-parameter gradients into `buffers`, indexed like store.params().
  void accumulate_grads(const ParamStore<T>& store, std::vector<Tensor<T>>& buffers) const;

  const std::vector<std::pair<std::size_t, std::size_t>>& bindings() const { return bindings_; }

 private:
  std::vector<Node<T>> nodes_;
  // (param index in store, node id)
  std::vector<std::pair<std::size_t, std::size_t>> bindings_;
  std::size_t visits_ = 0;
};

// ---- op set ----------------------------------------------------------------
// Binary elementwise ops accept either equal shapes or a right operand whose
// shape is a suffix of the left operand's shape (broadcast over leading axes).

template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> a, T factor);

template <typename T> Var<T> sigmoid(Var<T> x);
template <typename T> Var<T> tanh(Var<T> x);
/// tanh-approximated GELU (GPT-2 variant).
template <typename T> Var<T> gelu(Var<T> x);

/// a: [..., m, k]; b: [k, n] (shared) or [..., k, n] (same leading dims).
/// With trans_b, b is stored as [n, k] / [..., n, k].
template <typename T> Var<T> matmul(Var<T> a, Var<T> b, bool trans_b = false);

/// x: [..., in]; weight: [in, out]; bias: [out] or invalid Var for none.
template <typename T> Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias);

/// Cross-correlation with zero "same" padding.
/// x: [C_in, H, W] or [B, C_in, H, W]; kernels: [C_out, C_in, kh, kw] with odd kh, kw;
/// bias: [C_out] or invalid Var.
template <typename T> Var<T> conv2d(Var<T> x, Var<T> kernels, Var<T> bias);

/// Max-subtracted softmax along `axis`. With causal, axis must be the last one and
/// entry j of row i (row index = second-to-last axis) is forced to zero for j > i.
template <typename T> Var<T> softmax(Var<T> x, std::size_t axis, bool causal = false);

/// Normalizes each slice along `axis` to zero mean / unit variance, then applies
/// gain and shift (both of length shape[axis]).
template <typename T> Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> shift, std::size_t axis, T eps);

template <typename T> Var<T> slice(Var<T> x, std::size_t axis, std::size_t start, std::size_t length);
template <typename T> Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis);
template <typename T> Var<T> reshape(Var<T> x, Shape shape);
template <typename T> Var<T> permute(Var<T> x, const std::vector<std::size_t>& perm);

/// Sum of all entries, shape [1].
template <typename T> Var<T> sum(Var<T> x);
/// Sum of squared entries, shape [1].
template <typename T> Var<T> sum_squares(Var<T> x);

/// y[b, ...] = x[b, ...] * scale[b] + shift[b] with constant per-leading-index
/// scale/shift (used for de-normalization).
template <typename T> Var<T> batch_affine(Var<T> x, const std::vector<T>& scale, const std::vector<T>& shift);

}  // namespace isac::num
