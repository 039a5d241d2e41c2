// SPDX-License-Identifier: Apache-2.0
#include "isac/channel/dataset.hpp"

#include <bit>
#include <cstring>

#include "isac/numerics/archive.hpp"
#include "isac/numerics/parallel.hpp"
#include "isac/numerics/random.hpp"
#include "json.hpp"

namespace isac::channel {
namespace {

constexpr char kMagic[] = {'I', 'S', 'A', 'C', '1'};

cplx round_f32(cplx v) {
  return {static_cast<double>(static_cast<float>(v.real())), static_cast<double>(static_cast<float>(v.imag()))};
}

void append_block(std::vector<unsigned char>& out, const ComplexTensor& t) {
  const std::size_t start = out.size();
  out.resize(start + t.size() * 8);
  unsigned char* dst = out.data() + start;
  for (const auto& v : t.data()) {
    const float re = static_cast<float>(v.real());
    const float im = static_cast<float>(v.imag());
    std::memcpy(dst, &re, 4);
    std::memcpy(dst + 4, &im, 4);
    dst += 8;
  }
}

void read_block(const unsigned char*& src, ComplexTensor& t) {
  for (auto& v : t.data()) {
    float re, im;
    std::memcpy(&re, src, 4);
    std::memcpy(&im, src + 4, 4);
    v = {re, im};
    src += 8;
  }
}

}  // namespace

void DatasetConfig::validate() const {
  scenario.validate();
  if (p < 1 || q < 1) throw ConfigError("P and Q must be at least 1");
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.header = header;
  out.header.speeds_kmh.clear();
  for (std::size_t i : indices) {
    out.samples.push_back(samples.at(i));
    out.header.speeds_kmh.push_back(samples[i].speed_kmh);
  }
  out.header.count = out.samples.size();
  return out;
}

CsiSample synthesize_window(const DatasetConfig& cfg, std::uint64_t seed) {
  const auto sc = sample_scenario(cfg.scenario, seed);
  const auto& grid = cfg.scenario.grid;
  const std::size_t K = grid.k;
  const std::size_t N = sc.geometry.n();
  CsiSample s;
  s.p = cfg.p;
  s.q = cfg.q;
  s.speed_kmh = static_cast<double>(static_cast<float>(sc.mu_speed * 3.6));
  s.comm = ComplexTensor({cfg.p + cfg.q, K, N});
  s.sense = ComplexTensor({cfg.p, K, N, N});
  for (std::size_t t = 0; t < cfg.p + cfg.q; ++t) {
    const auto h = comm_channel_freq(sc, t, grid);
    std::copy(h.data().begin(), h.data().end(), s.comm.data().begin() + static_cast<long>(t * K * N));
    if (t < cfg.p) {
      const auto H = sense_channel_freq(sc, t, grid);
      std::copy(H.data().begin(), H.data().end(), s.sense.data().begin() + static_cast<long>(t * K * N * N));
    }
  }
  for (auto& v : s.comm.data()) v = round_f32(v);
  for (auto& v : s.sense.data()) v = round_f32(v);
  return s;
}

Dataset generate_dataset(const DatasetConfig& cfg, std::size_t count, std::uint64_t seed) {
  cfg.validate();
  if (count < 1) throw ConfigError("dataset count must be at least 1");
  Dataset d;
  d.samples.resize(count);
  num::parallel_for(count, [&](std::size_t i) { d.samples[i] = synthesize_window(cfg, num::derive_seed(seed, i)); });
  auto& h = d.header;
  h.p = cfg.p;
  h.q = cfg.q;
  h.k = cfg.scenario.grid.k;
  h.n = cfg.scenario.n_v * cfg.scenario.n_h;
  h.subcarrier_spacing = cfg.scenario.grid.subcarrier_spacing;
  h.carrier = cfg.scenario.grid.carrier;
  h.slot_duration = cfg.scenario.slot_duration;
  h.count = count;
  for (const auto& s : d.samples) h.speeds_kmh.push_back(s.speed_kmh);
  return d;
}

std::vector<unsigned char> serialize_dataset(const Dataset& d) {
  const auto& h = d.header;
  nlohmann::json j = {{"P", h.p},
                      {"Q", h.q},
                      {"K", h.k},
                      {"N", h.n},
                      {"delta_f", h.subcarrier_spacing},
                      {"f_c", h.carrier},
                      {"slot_duration", h.slot_duration},
                      {"count", d.samples.size()},
                      {"speeds_kmh", h.speeds_kmh}};
  const std::string header = j.dump();
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  const std::uint64_t len = header.size();
  const auto* lp = reinterpret_cast<const unsigned char*>(&len);
  out.insert(out.end(), lp, lp + 8);
  out.insert(out.end(), header.begin(), header.end());
  for (const auto& s : d.samples) {
    if (s.comm.shape() != num::Shape{h.p + h.q, h.k, h.n} || s.sense.shape() != num::Shape{h.p, h.k, h.n, h.n}) {
      throw DimensionError("sample shapes do not match dataset header");
    }
    append_block(out, s.comm);
    append_block(out, s.sense);
  }
  return out;
}

Dataset deserialize_dataset(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 13 || std::memcmp(bytes.data(), kMagic, 5) != 0) {
    throw IoError("not an ISAC dataset (bad magic)");
  }
  std::uint64_t len;
  std::memcpy(&len, bytes.data() + 5, 8);
  if (13 + len > bytes.size()) throw IoError("truncated dataset header");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin() + 13, bytes.begin() + 13 + static_cast<long>(len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed dataset header: ") + e.what());
  }
  Dataset d;
  auto& h = d.header;
  h.p = j.at("P");
  h.q = j.at("Q");
  h.k = j.at("K");
  h.n = j.at("N");
  h.subcarrier_spacing = j.at("delta_f");
  h.carrier = j.at("f_c");
  h.slot_duration = j.at("slot_duration");
  h.count = j.at("count");
  h.speeds_kmh = j.at("speeds_kmh").get<std::vector<double>>();
  if (h.speeds_kmh.size() != h.count) throw IoError("dataset header speed list does not match count");
  const std::size_t per = ((h.p + h.q) * h.k * h.n + h.p * h.k * h.n * h.n) * 8;
  if (bytes.size() != 13 + len + per * h.count) throw IoError("dataset payload size does not match header");
  const unsigned char* src = bytes.data() + 13 + len;
  d.samples.resize(h.count);
  for (std::size_t i = 0; i < h.count; ++i) {
    auto& s = d.samples[i];
    s.p = h.p;
    s.q = h.q;
    s.speed_kmh = h.speeds_kmh[i];
    s.comm = ComplexTensor({h.p + h.q, h.k, h.n});
    s.sense = ComplexTensor({h.p, h.k, h.n, h.n});
    read_block(src, s.comm);
    read_block(src, s.sense);
  }
  return d;
}

void write_dataset(const std::filesystem::path& path, const Dataset& d) {
  num::write_file_bytes(path, serialize_dataset(d));
}

Dataset read_dataset(const std::filesystem::path& path) {
  try {
    return deserialize_dataset(num::read_file_bytes(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace isac::channel
