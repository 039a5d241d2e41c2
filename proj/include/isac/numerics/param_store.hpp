// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "isac/numerics/tensor.hpp"

namespace isac::num {

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;
  bool has_grad = false;
  // Adam moments, allocated on the first optimizer step.
  Tensor<T> m;
  Tensor<T> v;
};

/// Named parameter tensors in insertion order with per-tensor freeze flags and
/// optimizer state.
template <typename T>
class ParamStore {
 public:
  Param<T>& add(const std::string& name, Tensor<T> init, bool trainable = true);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const;
  Param<T>& at(const std::string& name) { return params_[index_of(name)]; }
  const Param<T>& at(const std::string& name) const { return params_[index_of(name)]; }

  std::vector<Param<T>>& params() { return params_; }
  const std::vector<Param<T>>& params() const { return params_; }
  std::size_t size() const { return params_.size(); }

  /// Changes a freeze flag; throws once flags are locked for a run.
  void set_trainable(const std::string& name, bool trainable);
  void lock_flags() { flags_locked_ = true; }
  bool flags_locked() const { return flags_locked_; }

  void zero_grad();

  std::size_t count(bool trainable_only = false) const;

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }

  /// FNV-1a over names, flags and raw value bytes.
  std::uint64_t hash() const;

  /// Converts values (not optimizer state) to another precision.
  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& p : params_) out.add(p.name, p.value.template cast<U>(), p.trainable);
    return out;
  }

 private:
  std::vector<Param<T>> params_;
  std::map<std::string, std::size_t> index_;
  bool flags_locked_ = false;
  std::uint64_t step_ = 0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update over every trainable tensor at learning rate `lr`.
/// Frozen tensors are never touched. Throws TrainingError if a trainable tensor has
/// no gradient.
template <typename T>
void adam_step(ParamStore<T>& store, const AdamConfig& cfg, double lr);

template <typename T>
void adam_step(ParamStore<T>& store, const AdamConfig& cfg) {
  adam_step(store, cfg, cfg.lr);
}

}  // namespace isac::num
