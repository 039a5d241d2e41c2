// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "isac/numerics/param_store.hpp"
#include "isac/numerics/tensor.hpp"

namespace isac::num {

// Named-tensor archive ("NTAR1"):
//   5 bytes   magic "NTAR1"
//   8 bytes   little-endian u64 header length L
//   L bytes   UTF-8 JSON {"tensors": [{"name", "dtype", "shape", "offset"}, ...]}
//   payload   raw little-endian tensors; offsets are relative to payload start
// dtype is "f32" or "f64". Entries keep insertion order.
class TensorArchive {
 public:
  struct Entry {
    std::string name;
    std::string dtype;
    Shape shape;
    std::vector<unsigned char> bytes;
  };

  template <typename T>
  void put(const std::string& name, const Tensor<T>& t);

  bool contains(const std::string& name) const;
  const Entry& entry(const std::string& name) const;
  const std::vector<Entry>& entries() const { return entries_; }

  /// Decodes a tensor, converting from its stored dtype to T.
  template <typename T>
  Tensor<T> get(const std::string& name) const;

  std::vector<unsigned char> serialize() const;
  static TensorArchive deserialize(const std::vector<unsigned char>& bytes);

  void save(const std::filesystem::path& path) const;
  static TensorArchive load(const std::filesystem::path& path);

 private:
  std::vector<Entry> entries_;
};

/// Every parameter of `store` (or those accepted by `filter`) in store order.
template <typename T>
TensorArchive archive_params(const ParamStore<T>& store,
                             const std::function<bool(const std::string&)>& filter = nullptr);

/// Overwrites matching parameter values from an archive. Every archive tensor
/// must name an existing parameter of identical shape.
template <typename T>
void restore_params(ParamStore<T>& store, const TensorArchive& archive);

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes);

}  // namespace isac::num
