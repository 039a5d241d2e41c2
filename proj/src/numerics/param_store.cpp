// SPDX-License-Identifier: Apache-2.0
#include "isac/numerics/param_store.hpp"

#include <cmath>
#include <cstring>

namespace isac::num {

template <typename T>
Param<T>& ParamStore<T>::add(const std::string& name, Tensor<T> init, bool trainable) {
  if (contains(name)) throw ConfigError("duplicate parameter name: " + name);
  index_[name] = params_.size();
  Param<T> p;
  p.name = name;
  p.grad = Tensor<T>(init.shape());
  p.value = std::move(init);
  p.trainable = trainable;
  params_.push_back(std::move(p));
  return params_.back();
}

template <typename T>
std::size_t ParamStore<T>::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter: " + name);
  return it->second;
}

template <typename T>
void ParamStore<T>::set_trainable(const std::string& name, bool trainable) {
  if (flags_locked_) throw UsageError("freeze flags are locked; cannot change " + name);
  at(name).trainable = trainable;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& p : params_) {
    p.grad.fill(T(0));
    p.has_grad = false;
  }
}

template <typename T>
std::size_t ParamStore<T>::count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (!trainable_only || p.trainable) n += p.value.size();
  }
  return n;
}

template <typename T>
std::uint64_t ParamStore<T>::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* bytes, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& p : params_) {
    mix(p.name.data(), p.name.size());
    const unsigned char flag = p.trainable ? 1 : 0;
    mix(&flag, 1);
    mix(p.value.data().data(), p.value.size() * sizeof(T));
  }
  return h;
}

template <typename T>
void adam_step(ParamStore<T>& store, const AdamConfig& cfg, double lr) {
  for (const auto& p : store.params()) {
    if (p.trainable && !p.has_grad) throw TrainingError("missing gradient for trainable tensor " + p.name);
  }
  const std::uint64_t t = store.step() + 1;
  store.set_step(t);
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (auto& p : store.params()) {
    if (!p.trainable) continue;
    if (p.m.size() != p.value.size()) {
      p.m = Tensor<T>(p.value.shape());
      p.v = Tensor<T>(p.value.shape());
    }
    auto val = p.value.data();
    auto g = p.grad.data();
    auto m = p.m.data();
    auto v = p.v.data();
    for (std::size_t i = 0; i < val.size(); ++i) {
      const double gi = g[i];
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      val[i] = static_cast<T>(val[i] - lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

template class ParamStore<float>;
template class ParamStore<double>;
template void adam_step<float>(ParamStore<float>&, const AdamConfig&, double);
template void adam_step<double>(ParamStore<double>&, const AdamConfig&, double);

}  // namespace isac::num
