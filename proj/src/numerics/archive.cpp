// SPDX-License-Identifier: Apache-2.0
#include "isac/numerics/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace isac::num {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

namespace {

constexpr char kMagic[] = {'N', 'T', 'A', 'R', '1'};

template <typename T>
const char* dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "f32") return 4;
  if (dtype == "f64") return 8;
  throw IoError("unsupported archive dtype: " + dtype);
}

}  // namespace

template <typename T>
void TensorArchive::put(const std::string& name, const Tensor<T>& t) {
  if (contains(name)) throw UsageError("archive already holds tensor " + name);
  Entry e;
  e.name = name;
  e.dtype = dtype_name<T>();
  e.shape = t.shape();
  e.bytes.resize(t.size() * sizeof(T));
  std::memcpy(e.bytes.data(), t.data().data(), e.bytes.size());
  entries_.push_back(std::move(e));
}

bool TensorArchive::contains(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

const TensorArchive::Entry& TensorArchive::entry(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e;
  }
  throw UsageError("archive has no tensor " + name);
}

template <typename T>
Tensor<T> TensorArchive::get(const std::string& name) const {
  const auto& e = entry(name);
  const std::size_t n = shape_size(e.shape);
  std::vector<T> out(n);
  if (e.dtype == "f32") {
    for (std::size_t i = 0; i < n; ++i) {
      float v;
      std::memcpy(&v, e.bytes.data() + 4 * i, 4);
      out[i] = static_cast<T>(v);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      double v;
      std::memcpy(&v, e.bytes.data() + 8 * i, 8);
      out[i] = static_cast<T>(v);
    }
  }
  return Tensor<T>(e.shape, std::move(out));
}

std::vector<unsigned char> TensorArchive::serialize() const {
  nlohmann::json tensors = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& e : entries_) {
    tensors.push_back({{"name", e.name}, {"dtype", e.dtype}, {"shape", e.shape}, {"offset", offset}});
    offset += e.bytes.size();
  }
  const std::string header = nlohmann::json{{"tensors", tensors}}.dump();
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  const std::uint64_t len = header.size();
  const auto* lp = reinterpret_cast<const unsigned char*>(&len);
  out.insert(out.end(), lp, lp + 8);
  out.insert(out.end(), header.begin(), header.end());
  for (const auto& e : entries_) out.insert(out.end(), e.bytes.begin(), e.bytes.end());
  return out;
}

TensorArchive TensorArchive::deserialize(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 13 || std::memcmp(bytes.data(), kMagic, 5) != 0) {
    throw IoError("not a named-tensor archive (bad magic)");
  }
  std::uint64_t len;
  std::memcpy(&len, bytes.data() + 5, 8);
  if (13 + len > bytes.size()) throw IoError("truncated archive header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 13, bytes.begin() + 13 + static_cast<long>(len));
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(std::string("malformed archive header: ") + ex.what());
  }
  const std::size_t payload = 13 + len;
  TensorArchive out;
  for (const auto& t : header.at("tensors")) {
    Entry e;
    e.name = t.at("name").get<std::string>();
    e.dtype = t.at("dtype").get<std::string>();
    e.shape = t.at("shape").get<Shape>();
    const auto off = t.at("offset").get<std::uint64_t>();
    const std::size_t n = shape_size(e.shape) * dtype_size(e.dtype);
    if (payload + off + n > bytes.size()) throw IoError("archive payload truncated at tensor " + e.name);
    e.bytes.assign(bytes.begin() + static_cast<long>(payload + off),
                   bytes.begin() + static_cast<long>(payload + off + n));
    out.entries_.push_back(std::move(e));
  }
  return out;
}

void TensorArchive::save(const std::filesystem::path& path) const { write_file_bytes(path, serialize()); }

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
  try {
    return deserialize(read_file_bytes(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

template <typename T>
TensorArchive archive_params(const ParamStore<T>& store, const std::function<bool(const std::string&)>& filter) {
  TensorArchive a;
  for (const auto& p : store.params()) {
    if (!filter || filter(p.name)) a.put(p.name, p.value);
  }
  return a;
}

template <typename T>
void restore_params(ParamStore<T>& store, const TensorArchive& archive) {
  std::string offenders;
  for (const auto& e : archive.entries()) {
    if (!store.contains(e.name)) {
      offenders += " " + e.name + "(unknown)";
    } else if (store.at(e.name).value.shape() != e.shape) {
      offenders += " " + e.name + shape_str(e.shape) + "!=" + shape_str(store.at(e.name).value.shape());
    }
  }
  if (!offenders.empty()) throw ImportError("archive does not match parameters:" + offenders);
  for (const auto& e : archive.entries()) store.at(e.name).value = archive.get<T>(e.name);
}

template void TensorArchive::put<float>(const std::string&, const Tensor<float>&);
template void TensorArchive::put<double>(const std::string&, const Tensor<double>&);
template Tensor<float> TensorArchive::get<float>(const std::string&) const;
template Tensor<double> TensorArchive::get<double>(const std::string&) const;
template TensorArchive archive_params<float>(const ParamStore<float>&, const std::function<bool(const std::string&)>&);
template TensorArchive archive_params<double>(const ParamStore<double>&,
                                              const std::function<bool(const std::string&)>&);
template void restore_params<float>(ParamStore<float>&, const TensorArchive&);
template void restore_params<double>(ParamStore<double>&, const TensorArchive&);

}  // namespace isac::num
