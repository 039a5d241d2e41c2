// SPDX-License-Identifier: Apache-2.0
#include "isac/numerics/autodiff.hpp"

namespace isac::num {

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return graph_->node(id_).value;
}

template <typename T>
const Tensor<T>& Var<T>::grad() const {
  return graph_->grad_buffer(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return graph_->node(id_).requires_grad;
}

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> value) {
  Node<T> n;
  n.value = std::move(value);
  n.op = "constant";
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::leaf(Tensor<T> value, bool requires_grad) {
  Node<T> n;
  n.value = std::move(value);
  n.op = "leaf";
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::parameter(const ParamStore<T>& store, const std::string& name) {
  const std::size_t idx = store.index_of(name);
  for (const auto& [p, id] : bindings_) {
    if (p == idx) return Var<T>(this, id);
  }
  const auto& param = store.params()[idx];
  Node<T> n;
  n.value = param.value;
  n.op = "parameter";
  n.requires_grad = param.trainable;
  nodes_.push_back(std::move(n));
  bindings_.emplace_back(idx, nodes_.size() - 1);
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::make(std::string_view op, Tensor<T> value, std::vector<std::size_t> parents,
                      typename Node<T>::Backward backward) {
  Node<T> n;
  n.value = std::move(value);
  n.op = op;
  for (std::size_t p : parents) {
    if (nodes_[p].requires_grad) n.requires_grad = true;
  }
  n.parents = std::move(parents);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Tensor<T>& Graph<T>::grad_buffer(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Tensor<T>(n.value.shape());
  return n.grad;
}

template <typename T>
void Graph<T>::backward(Var<T> loss) {
  if (loss.graph() != this) throw UsageError("loss belongs to a different graph");
  const auto& ln = nodes_[loss.id()];
  if (ln.value.size() != 1) {
    throw UsageError("backward requires a scalar loss, got shape " + shape_str(ln.value.shape()));
  }
  visits_ = 0;
  if (!ln.requires_grad) return;
  grad_buffer(loss.id())[0] += T(1);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    ++visits_;
    if (n.backward) n.backward(*this, i);
  }
}

template <typename T>
void Graph<T>::accumulate_grads(ParamStore<T>& store) const {
  auto& params = store.params();
  for (const auto& [idx, id] : bindings_) {
    auto& p = params[idx];
    if (!p.trainable) continue;
    p.has_grad = true;
    const auto& g = nodes_[id].grad;
    if (g.size() == 0) continue;
    auto dst = p.grad.data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

template <typename T>
void Graph<T>::accumulate_grads(const ParamStore<T>& store, std::vector<Tensor<T>>& buffers) const {
  const auto& params = store.params();
  if (buffers.size() != params.size()) {
    buffers.clear();
    for (const auto& p : params) buffers.emplace_back(p.value.shape());
  }
  for (const auto& [idx, id] : bindings_) {
    if (!params[idx].trainable) continue;
    const auto& g = nodes_[id].grad;
    if (g.size() == 0) continue;
    auto dst = buffers[idx].data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

template class Var<float>;
template class Var<double>;
template class Graph<float>;
template class Graph<double>;

}  // namespace isac::num
