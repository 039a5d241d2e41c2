// SPDX-License-Identifier: Apache-2.0
#include "isac/channel/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "isac/numerics/random.hpp"

namespace isac::channel {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

cplx phasor(double cycles) { return std::polar(1.0, kTwoPi * cycles); }

void scale_power(std::vector<PathParams>& paths, bool comm, double target) {
  double total = 0.0;
  for (const auto& p : paths) {
    if (comm && p.in_comm()) total += std::norm(p.alpha);
    if (!comm && p.in_sense()) total += std::norm(p.beta);
  }
  if (total <= 0.0) return;
  const double s = std::sqrt(target / total);
  for (auto& p : paths) {
    if (comm && p.in_comm()) p.alpha *= s;
    if (!comm && p.in_sense()) p.beta *= s;
  }
}

}  // namespace

void ArrayGeometry::validate() const {
  if (n_v == 0 || n_h == 0) throw ConfigError("array must have at least one element per axis");
  if (!(d_v > 0.0) || !(d_h > 0.0)) throw ConfigError("antenna spacings must be positive");
  if (!(wavelength > 0.0)) throw ConfigError("wavelength must be positive");
}

ArrayGeometry ArrayGeometry::half_wavelength(std::size_t n_v, std::size_t n_h, double wavelength) {
  return ArrayGeometry{n_v, n_h, wavelength / 2.0, wavelength / 2.0, wavelength};
}

void OfdmGrid::validate() const {
  if (k < 2) throw ConfigError("OFDM grid needs at least 2 subcarriers");
  if (!(subcarrier_spacing > 0.0)) throw ConfigError("subcarrier spacing must be positive");
  if (!(carrier > 0.0)) throw ConfigError("carrier frequency must be positive");
}

void Scenario::validate() const {
  geometry.validate();
  if (paths.empty()) throw ConfigError("scenario has no paths");
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& p : paths) ++counts[static_cast<int>(p.kind)];
  if (counts[0] != n_shared || counts[1] != n_comm || counts[2] != n_sense) {
    throw ConfigError("scenario path kinds do not match N_0/N_1/N_2");
  }
}

void ScenarioConfig::validate() const {
  grid.validate();
  geometry().validate();
  if (n_shared + n_comm + n_sense == 0) throw ConfigError("scenario needs at least one path");
  if (speed_min_kmh < 0.0 || speed_max_kmh < speed_min_kmh) throw ConfigError("invalid MU speed range");
  if (scatterer_speed_max < 0.0) throw ConfigError("scatterer speed must be non-negative");
  if (rho < 0.0 || rho > 1.0) throw ConfigError("rho must lie in [0, 1]");
  if (!(delay_spread_fraction > 0.0) || delay_spread_fraction > 1.25) {
    throw ConfigError("delay_spread_fraction must lie in (0, 1.25] to stay within the unambiguous span");
  }
  if (!(pdp_decay_fraction > 0.0)) throw ConfigError("pdp_decay_fraction must be positive");
  if (!(slot_duration > 0.0)) throw ConfigError("slot duration must be positive");
  if (!(power_total > 0.0)) throw ConfigError("power_total must be positive");
}

ComplexTensor steering_vector(double elevation, double azimuth, const ArrayGeometry& g) {
  ComplexTensor a({g.n()});
  const double v_cycles = g.d_v / g.wavelength * std::sin(elevation);
  const double h_cycles = g.d_h / g.wavelength * std::cos(elevation) * std::sin(azimuth);
  const double amp = 1.0 / static_cast<double>(g.n_v * g.n_h);
  for (std::size_t m = 0; m < g.n_v; ++m) {
    for (std::size_t n = 0; n < g.n_h; ++n) {
      a[m * g.n_h + n] = amp * phasor(v_cycles * static_cast<double>(m) + h_cycles * static_cast<double>(n));
    }
  }
  return a;
}

Scenario sample_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  num::Rng rng(seed);
  Scenario s;
  s.geometry = cfg.geometry();
  s.slot_duration = cfg.slot_duration;
  s.n_shared = cfg.n_shared;
  s.n_comm = cfg.n_comm;
  s.n_sense = cfg.n_sense;
  s.mu_speed = num::uniform(rng, cfg.speed_min_kmh, cfg.speed_max_kmh) / 3.6;
  if (cfg.speed_min_kmh == cfg.speed_max_kmh) s.mu_speed = cfg.speed_min_kmh / 3.6;

  const double lambda = cfg.grid.wavelength();
  const double tau_max = cfg.max_delay();
  const double decay = cfg.pdp_decay_fraction * tau_max;
  const std::size_t total = cfg.n_shared + cfg.n_comm + cfg.n_sense;
  s.paths.reserve(total);

  for (std::size_t i = 0; i < total; ++i) {
    PathParams p;
    p.kind = i < cfg.n_shared ? PathKind::shared
             : i < cfg.n_shared + cfg.n_comm ? PathKind::comm_only
                                             : PathKind::sense_only;
    p.elevation = num::uniform(rng, -std::numbers::pi / 3.0, std::numbers::pi / 3.0);
    p.azimuth = num::uniform(rng, -std::numbers::pi / 2.0, std::numbers::pi / 2.0);
    const double tau = num::uniform(rng, 0.0, tau_max);
    const double tau_bar = num::uniform(rng, 0.0, tau_max);
    const double psi = num::uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double v_scat = num::uniform(rng, 0.0, cfg.scatterer_speed_max);
    const double phase_a = num::uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double phase_b = num::uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const bool is_los = cfg.los && i == 0 && p.kind == PathKind::shared;

    const double v_eff = is_los ? s.mu_speed : s.mu_speed + v_scat;
    p.doppler = v_eff / lambda * std::cos(psi);

    // Exponential power-delay profile on magnitudes.
    const double mag_a = std::exp(-0.5 * tau / decay);
    const double mag_b_indep = std::exp(-0.5 * tau_bar / decay);
    if (p.in_comm()) {
      p.tau = is_los ? 0.0 : tau;
      p.alpha = std::polar(mag_a, phase_a);
    }
    if (p.in_sense()) {
      p.tau_bar = is_los ? 0.0 : tau_bar;
      const double mag_b = p.kind == PathKind::shared ? cfg.rho * mag_a + (1.0 - cfg.rho) * mag_b_indep : mag_b_indep;
      p.beta = std::polar(mag_b, phase_b);
    }
    s.paths.push_back(p);
  }

  if (cfg.los && cfg.n_shared > 0) {
    double strongest_a = 0.0, strongest_b = 0.0;
    for (std::size_t i = 1; i < s.paths.size(); ++i) {
      strongest_a = std::max(strongest_a, std::abs(s.paths[i].alpha));
      strongest_b = std::max(strongest_b, std::abs(s.paths[i].beta));
    }
    const double boost = std::sqrt(cfg.los_power_ratio);
    auto& los = s.paths[0];
    if (strongest_a > 0.0) los.alpha = std::polar(boost * strongest_a, std::arg(los.alpha));
    if (strongest_b > 0.0) los.beta = std::polar(boost * strongest_b, std::arg(los.beta));
  }

  // Expected per-entry power: comm entries scale as |alpha|^2 / N^2, sensing as |beta|^2 / N^4.
  const double n = static_cast<double>(s.geometry.n());
  scale_power(s.paths, true, cfg.power_total * n * n);
  scale_power(s.paths, false, cfg.power_total * n * n * n * n);
  s.validate();
  return s;
}

ComplexTensor comm_channel_freq(const Scenario& sc, std::size_t t, const OfdmGrid& grid) {
  const std::size_t N = sc.geometry.n();
  ComplexTensor h({grid.k, N});
  const double time = static_cast<double>(t) * sc.slot_duration;
  for (const auto& p : sc.paths) {
    if (!p.in_comm()) continue;
    const auto a = steering_vector(p.elevation, p.azimuth, sc.geometry);
    const cplx coeff = p.alpha * phasor(p.doppler * time);
    for (std::size_t k = 0; k < grid.k; ++k) {
      const cplx ck = coeff * phasor(-grid.subcarrier_offset(k) * p.tau);
      for (std::size_t n = 0; n < N; ++n) h[k * N + n] += ck * a[n];
    }
  }
  return h;
}

ComplexTensor sense_channel_freq(const Scenario& sc, std::size_t t, const OfdmGrid& grid) {
  const std::size_t N = sc.geometry.n();
  ComplexTensor H({grid.k, N, N});
  const double time = static_cast<double>(t) * sc.slot_duration;
  std::vector<cplx> outer(N * N);
  for (const auto& p : sc.paths) {
    if (!p.in_sense()) continue;
    const auto a = steering_vector(p.elevation, p.azimuth, sc.geometry);
    for (std::size_t m = 0; m < N; ++m) {
      for (std::size_t n = 0; n < N; ++n) outer[m * N + n] = a[m] * a[n];
    }
    const cplx coeff = p.beta * phasor(p.doppler * time);
    for (std::size_t k = 0; k < grid.k; ++k) {
      const cplx ck = coeff * phasor(-grid.subcarrier_offset(k) * p.tau_bar);
      cplx* slice = &H[k * N * N];
      for (std::size_t i = 0; i < N * N; ++i) slice[i] += ck * outer[i];
    }
  }
  return H;
}

}  // namespace isac::channel
