// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "isac/channel/channel.hpp"

namespace isac::channel {

/// One training window: P+Q communication slots and P sensing slots, frequency domain.
struct CsiSample {
  std::size_t p = 0;
  std::size_t q = 0;
  ComplexTensor comm;   // [P+Q, K, N]
  ComplexTensor sense;  // [P, K, N, N]
  double speed_kmh = 0.0;

  std::size_t k() const { return comm.dim(1); }
  std::size_t n() const { return comm.dim(2); }
};

struct DatasetConfig {
  ScenarioConfig scenario;
  std::size_t p = 10;
  std::size_t q = 5;

  void validate() const;
};

struct DatasetHeader {
  std::size_t p = 0;
  std::size_t q = 0;
  std::size_t k = 0;
  std::size_t n = 0;
  double subcarrier_spacing = 0.0;
  double carrier = 0.0;
  double slot_duration = 0.0;
  std::size_t count = 0;
  std::vector<double> speeds_kmh;
};

struct Dataset {
  DatasetHeader header;
  std::vector<CsiSample> samples;

  std::size_t size() const { return samples.size(); }
  /// Copy holding only the listed sample indices, in the given order.
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

/// Builds one window from a fresh scenario. Values are rounded to 32-bit floats,
/// so in-memory samples equal what the dataset file stores.
CsiSample synthesize_window(const DatasetConfig& config, std::uint64_t seed);

/// `count` windows with per-sample seeds derived from `seed`, generated in parallel
/// and kept in index order.
Dataset generate_dataset(const DatasetConfig& config, std::size_t count, std::uint64_t seed);

// File format: magic "ISAC1", little-endian u64 header length, JSON header
// {P, Q, K, N, delta_f, f_c, slot_duration, count, speeds_kmh}, then per sample the
// comm block followed by the sensing block as interleaved f32 (re, im), row-major.
std::vector<unsigned char> serialize_dataset(const Dataset& dataset);
Dataset deserialize_dataset(const std::vector<unsigned char>& bytes);
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace isac::channel
