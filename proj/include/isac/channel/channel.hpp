// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "isac/numerics/tensor.hpp"

namespace isac::channel {

using num::ComplexTensor;
using num::cplx;

constexpr double kSpeedOfLight = 299792458.0;

/// Uniform planar array with N = n_v * n_h elements.
struct ArrayGeometry {
  std::size_t n_v = 4;
  std::size_t n_h = 4;
  double d_v = 0.0;  // metres
  double d_h = 0.0;  // metres
  double wavelength = 0.0;

  std::size_t n() const { return n_v * n_h; }
  void validate() const;

  static ArrayGeometry half_wavelength(std::size_t n_v, std::size_t n_h, double wavelength);
};

struct OfdmGrid {
  std::size_t k = 48;
  double subcarrier_spacing = 60e3;  // Hz
  double carrier = 28e9;             // Hz

  double wavelength() const { return kSpeedOfLight / carrier; }
  /// Baseband offset of 0-based subcarrier index `k`: k * spacing.
  double subcarrier_offset(std::size_t index) const { return static_cast<double>(index) * subcarrier_spacing; }
  void validate() const;
};

enum class PathKind { shared, comm_only, sense_only };

struct PathParams {
  PathKind kind = PathKind::shared;
  cplx alpha{0.0, 0.0};  // communication coefficient; zero for sense-only
  cplx beta{0.0, 0.0};   // sensing coefficient; zero for comm-only
  double tau = 0.0;      // one-way delay, s
  double tau_bar = 0.0;  // round-trip delay, s
  double doppler = 0.0;  // Hz
  double elevation = 0.0;
  double azimuth = 0.0;

  bool in_comm() const { return kind != PathKind::sense_only; }
  bool in_sense() const { return kind != PathKind::comm_only; }
};

/// One quasi-stationary window: every parameter is fixed and only the Doppler
/// phasor evolves from slot to slot.
struct Scenario {
  ArrayGeometry geometry;
  std::vector<PathParams> paths;
  double slot_duration = 0.5e-3;
  std::size_t n_shared = 0;
  std::size_t n_comm = 0;
  std::size_t n_sense = 0;
  double mu_speed = 0.0;  // m/s

  void validate() const;
};

struct ScenarioConfig {
  OfdmGrid grid;
  std::size_t n_v = 4;
  std::size_t n_h = 4;
  std::size_t n_shared = 14;
  std::size_t n_comm = 2;
  std::size_t n_sense = 12;
  double speed_min_kmh = 10.0;
  double speed_max_kmh = 100.0;
  double scatterer_speed_max = 5.0;  // m/s, per-scatterer speed drawn from U[0, max]
  double rho = 0.7;                  // |alpha|-|beta| magnitude coupling of shared paths
  double delay_spread_fraction = 0.5;  // max delay = 0.8 * fraction / spacing
  double pdp_decay_fraction = 0.35;    // PDP decay constant as a fraction of max delay
  bool los = false;
  double los_power_ratio = 4.0;  // LoS power over strongest NLoS path
  double slot_duration = 0.5e-3;
  double power_total = 1.0;  // expected per-entry power of both channels

  ArrayGeometry geometry() const { return ArrayGeometry::half_wavelength(n_v, n_h, grid.wavelength()); }
  double max_delay() const { return 0.8 * delay_spread_fraction / grid.subcarrier_spacing; }
  void validate() const;
};

/// a(theta, phi) = a_v(theta) kron a_h(theta, phi), each factor carrying its 1/N_v, 1/N_h prefactor.
ComplexTensor steering_vector(double elevation, double azimuth, const ArrayGeometry& geometry);

/// Draws a scenario deterministically from `seed`.
Scenario sample_scenario(const ScenarioConfig& config, std::uint64_t seed);

/// Frequency-domain communication channel at slot t, shape [K, N].
ComplexTensor comm_channel_freq(const Scenario& scenario, std::size_t t, const OfdmGrid& grid);

/// Frequency-domain mono-static sensing channel at slot t, shape [K, N, N].
ComplexTensor sense_channel_freq(const Scenario& scenario, std::size_t t, const OfdmGrid& grid);

}  // namespace isac::channel
