// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>

#include "doctest.h"
#include "isac/channel/dataset.hpp"
#include "isac/numerics/archive.hpp"
#include "isac/numerics/dft.hpp"

using namespace isac;
using namespace isac::channel;
using num::cplx;

namespace {

constexpr double kPi = std::numbers::pi;

OfdmGrid small_grid(std::size_t k) {
  OfdmGrid g;
  g.k = k;
  return g;
}

// Elementwise oracle: entry (m, n) = 1/(Nv Nh) exp(j 2 pi (m dv sin th + n dh cos th sin ph) / lambda).
cplx steering_entry(double th, double ph, const ArrayGeometry& g, std::size_t m, std::size_t n) {
  const double phase = 2.0 * kPi *
                       (static_cast<double>(m) * g.d_v * std::sin(th) +
                        static_cast<double>(n) * g.d_h * std::cos(th) * std::sin(ph)) /
                       g.wavelength;
  return std::polar(1.0 / static_cast<double>(g.n_v * g.n_h), phase);
}

Scenario random_paths(std::size_t count, const ArrayGeometry& geo, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Scenario s;
  s.geometry = geo;
  s.slot_duration = 0.5e-3;
  for (std::size_t i = 0; i < count; ++i) {
    PathParams p;
    p.kind = PathKind::shared;
    p.alpha = std::polar(0.5 + u(rng), 2 * kPi * u(rng));
    p.beta = std::polar(0.5 + u(rng), 2 * kPi * u(rng));
    p.tau = u(rng) * 5e-6;
    p.tau_bar = u(rng) * 5e-6;
    p.doppler = (u(rng) - 0.5) * 2000.0;
    p.elevation = (u(rng) - 0.5) * kPi;
    p.azimuth = (u(rng) - 0.5) * 2 * kPi;
    s.paths.push_back(p);
  }
  s.n_shared = count;
  return s;
}

Scenario single_path(const PathParams& p, const ArrayGeometry& geo) {
  Scenario s;
  s.geometry = geo;
  s.paths = {p};
  s.n_shared = 1;
  return s;
}

double cabs_max_diff(const num::ComplexTensor& a, const num::ComplexTensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Leading singular triplet of an n x n complex matrix by power iteration on H^H H.
struct Leading {
  double sigma;
  std::vector<cplx> u;
  std::vector<cplx> v;
};

Leading leading_singular(const cplx* H, std::size_t n) {
  std::vector<cplx> v(n, cplx(1.0, 0.3)), w(n), u(n);
  double sigma = 0.0;
  for (int it = 0; it < 200; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = 0;
      for (std::size_t j = 0; j < n; ++j) u[i] += H[i * n + j] * v[j];
    }
    for (std::size_t j = 0; j < n; ++j) {
      w[j] = 0;
      for (std::size_t i = 0; i < n; ++i) w[j] += std::conj(H[i * n + j]) * u[i];
    }
    double norm = 0;
    for (auto x : w) norm += std::norm(x);
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < n; ++j) v[j] = w[j] / norm;
  }
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = 0;
    for (std::size_t j = 0; j < n; ++j) u[i] += H[i * n + j] * v[j];
  }
  double un = 0;
  for (auto x : u) un += std::norm(x);
  sigma = std::sqrt(un);
  for (auto& x : u) x /= sigma;
  return {sigma, u, v};
}

double cosine(const std::vector<cplx>& a, std::span<const cplx> b) {
  cplx dot = 0;
  double na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += std::conj(a[i]) * b[i];
    na += std::norm(a[i]);
    nb += std::norm(b[i]);
  }
  return std::abs(dot) / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("steering vector at zero angles is uniform 1/16") {
  const auto geo = ArrayGeometry::half_wavelength(4, 4, 0.0107);
  const auto a = steering_vector(0.0, 0.0, geo);
  REQUIRE(a.size() == 16);
  for (const auto& v : a.data()) {
    CHECK(std::abs(v.real() - 1.0 / 16) < 1e-15);
    CHECK(std::abs(v.imag()) < 1e-15);
  }
}

TEST_CASE("steering vector entries have magnitude 1/(Nv*Nh)") {
  const auto geo = ArrayGeometry::half_wavelength(3, 5, 0.01);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> th(-kPi / 2, kPi / 2), ph(-kPi, kPi);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = steering_vector(th(rng), ph(rng), geo);
    for (const auto& v : a.data()) CHECK(std::abs(std::abs(v) - 1.0 / 15) < 1e-15);
  }
}

TEST_CASE("steering vector matches Kronecker double-loop oracle") {
  ArrayGeometry geo{4, 3, 0.006, 0.004, 0.0107};
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> th(-kPi / 2, kPi / 2), ph(-kPi, kPi);
  for (int trial = 0; trial < 10; ++trial) {
    const double t = th(rng), p = ph(rng);
    const auto a = steering_vector(t, p, geo);
    for (std::size_t m = 0; m < geo.n_v; ++m)
      for (std::size_t n = 0; n < geo.n_h; ++n) CHECK(std::abs(a[m * geo.n_h + n] - steering_entry(t, p, geo, m, n)) < 1e-12);
  }
}

TEST_CASE("all-shared taxonomy gives identical comm and sensing angle sets") {
  ScenarioConfig cfg;
  cfg.n_shared = 5;
  cfg.n_comm = 0;
  cfg.n_sense = 0;
  const auto s = sample_scenario(cfg, 42);
  REQUIRE(s.paths.size() == 5);
  for (const auto& p : s.paths) {
    CHECK(p.kind == PathKind::shared);
    CHECK(p.in_comm());
    CHECK(p.in_sense());
    CHECK(std::abs(p.alpha) > 0.0);
    CHECK(std::abs(p.beta) > 0.0);
  }
}

TEST_CASE("path kinds follow configured counts and exclusive coefficients") {
  ScenarioConfig cfg;
  const auto s = sample_scenario(cfg, 1);
  REQUIRE(s.paths.size() == 28);
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& p : s.paths) {
    ++counts[static_cast<int>(p.kind)];
    if (p.kind == PathKind::comm_only) {
      CHECK(p.beta == cplx(0, 0));
      CHECK(p.tau_bar == 0.0);
    }
    if (p.kind == PathKind::sense_only) {
      CHECK(p.alpha == cplx(0, 0));
      CHECK(p.tau == 0.0);
    }
    CHECK(p.tau < 1.0 / cfg.grid.subcarrier_spacing);
    CHECK(p.tau_bar < 1.0 / cfg.grid.subcarrier_spacing);
  }
  CHECK(counts[0] == 14);
  CHECK(counts[1] == 2);
  CHECK(counts[2] == 12);
}

TEST_CASE("empty path list is a config error") {
  ScenarioConfig cfg;
  cfg.n_shared = cfg.n_comm = cfg.n_sense = 0;
  CHECK_THROWS_AS(sample_scenario(cfg, 1), ConfigError);
}

TEST_CASE("scenario sampling is deterministic in the seed") {
  ScenarioConfig cfg;
  const auto a = sample_scenario(cfg, 99);
  const auto b = sample_scenario(cfg, 99);
  const auto c = sample_scenario(cfg, 100);
  REQUIRE(a.paths.size() == b.paths.size());
  CHECK(a.mu_speed == b.mu_speed);
  for (std::size_t i = 0; i < a.paths.size(); ++i) {
    CHECK(a.paths[i].alpha == b.paths[i].alpha);
    CHECK(a.paths[i].beta == b.paths[i].beta);
    CHECK(a.paths[i].tau == b.paths[i].tau);
    CHECK(a.paths[i].tau_bar == b.paths[i].tau_bar);
    CHECK(a.paths[i].doppler == b.paths[i].doppler);
    CHECK(a.paths[i].elevation == b.paths[i].elevation);
    CHECK(a.paths[i].azimuth == b.paths[i].azimuth);
  }
  CHECK(a.paths[0].alpha != c.paths[0].alpha);
}

TEST_CASE("Doppler stays within the speed bound over 10^4 draws") {
  ScenarioConfig cfg;
  cfg.speed_min_kmh = cfg.speed_max_kmh = 50.0;
  const double lambda = cfg.grid.wavelength();
  const double bound = (50.0 / 3.6 + cfg.scatterer_speed_max) / lambda;
  // v / lambda alone at 28 GHz
  CHECK(50.0 / 3.6 / lambda == doctest::Approx(1297.0).epsilon(0.01));
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const auto s = sample_scenario(cfg, seed);
    CHECK(s.mu_speed == doctest::Approx(50.0 / 3.6));
    for (const auto& p : s.paths) worst = std::max(worst, std::abs(p.doppler));
  }
  CHECK(worst <= bound);
  CHECK(worst > 0.95 * 50.0 / 3.6 / lambda);
}

TEST_CASE("flat single path gives identical rows alpha*a") {
  const auto geo = ArrayGeometry::half_wavelength(2, 2, 0.0107);
  PathParams p;
  p.alpha = cplx(0.3, -0.7);
  p.elevation = 0.4;
  p.azimuth = -0.9;
  const auto sc = single_path(p, geo);
  const auto grid = small_grid(8);
  const auto h = comm_channel_freq(sc, 3, grid);
  const auto a = steering_vector(p.elevation, p.azimuth, geo);
  for (std::size_t k = 0; k < grid.k; ++k)
    for (std::size_t n = 0; n < 4; ++n) CHECK(std::abs(h[k * 4 + n] - p.alpha * a[n]) < 1e-15);
}

TEST_CASE("slot 0 has no Doppler rotation") {
  const auto geo = ArrayGeometry::half_wavelength(2, 2, 0.0107);
  auto sc = random_paths(3, geo, 5);
  auto still = sc;
  for (auto& p : still.paths) p.doppler = 0.0;
  const auto grid = small_grid(8);
  CHECK(cabs_max_diff(comm_channel_freq(sc, 0, grid), comm_channel_freq(still, 0, grid)) == 0.0);
  CHECK(cabs_max_diff(sense_channel_freq(sc, 0, grid), sense_channel_freq(still, 0, grid)) == 0.0);
}

TEST_CASE("comm channel matches path-summation oracle on 3 paths") {
  const auto geo = ArrayGeometry::half_wavelength(2, 2, 0.0107);
  const auto sc = random_paths(3, geo, 17);
  const auto grid = small_grid(8);
  for (std::size_t t : {0u, 1u, 7u}) {
    const auto h = comm_channel_freq(sc, t, grid);
    for (std::size_t k = 0; k < 8; ++k)
      for (std::size_t m = 0; m < 2; ++m)
        for (std::size_t n = 0; n < 2; ++n) {
          cplx want = 0;
          for (const auto& p : sc.paths) {
            const double ph = 2 * kPi * p.doppler * static_cast<double>(t) * sc.slot_duration -
                              2 * kPi * static_cast<double>(k) * grid.subcarrier_spacing * p.tau;
            want += p.alpha * std::polar(1.0, ph) * steering_entry(p.elevation, p.azimuth, geo, m, n);
          }
          CHECK(std::abs(h[k * 4 + m * 2 + n] - want) < 1e-12);
        }
  }
}

TEST_CASE("sensing channel matches path-summation oracle on 3 paths") {
  const auto geo = ArrayGeometry::half_wavelength(2, 2, 0.0107);
  const auto sc = random_paths(3, geo, 23);
  const auto grid = small_grid(8);
  const std::size_t t = 4;
  const auto H = sense_channel_freq(sc, t, grid);
  for (std::size_t k = 0; k < 8; ++k)
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c) {
        cplx want = 0;
        for (const auto& p : sc.paths) {
          const double ph = 2 * kPi * p.doppler * static_cast<double>(t) * sc.slot_duration -
                            2 * kPi * static_cast<double>(k) * grid.subcarrier_spacing * p.tau_bar;
          want += p.beta * std::polar(1.0, ph) * steering_entry(p.elevation, p.azimuth, geo, r / 2, r % 2) *
                  steering_entry(p.elevation, p.azimuth, geo, c / 2, c % 2);
        }
        CHECK(std::abs(H[(k * 4 + r) * 4 + c] - want) < 1e-12);
      }
}

TEST_CASE("single-path sensing slices are rank one") {
  const auto geo = ArrayGeometry::half_wavelength(4, 4, 0.0107);
  auto sc = random_paths(1, geo, 31);
  const auto grid = small_grid(8);
  const auto H = sense_channel_freq(sc, 2, grid);
  for (std::size_t k = 0; k < grid.k; ++k) {
    const cplx* slice = &H[k * 256];
    const auto lead = leading_singular(slice, 16);
    // sigma_2 <= || H - sigma_1 u v^H ||_F
    double resid = 0;
    for (std::size_t i = 0; i < 16; ++i)
      for (std::size_t j = 0; j < 16; ++j) resid += std::norm(slice[i * 16 + j] - lead.sigma * lead.u[i] * std::conj(lead.v[j]));
    CHECK(std::sqrt(resid) < 1e-10 * lead.sigma);
  }
}

TEST_CASE("sensing slices are symmetric") {
  ScenarioConfig cfg;
  cfg.grid = small_grid(8);
  const auto sc = sample_scenario(cfg, 8);
  const auto H = sense_channel_freq(sc, 5, cfg.grid);
  for (std::size_t k = 0; k < 8; ++k)
    for (std::size_t r = 0; r < 16; ++r)
      for (std::size_t c = 0; c < 16; ++c) CHECK(std::abs(H[(k * 16 + r) * 16 + c] - H[(k * 16 + c) * 16 + r]) < 1e-12);
}

TEST_CASE("shared path comm steering equals sensing principal direction") {
  ScenarioConfig cfg;
  cfg.grid = small_grid(4);
  const auto sc = sample_scenario(cfg, 77);
  for (const auto& p : sc.paths) {
    if (p.kind != PathKind::shared) continue;
    const auto only = single_path(p, sc.geometry);
    const auto h = comm_channel_freq(only, 1, cfg.grid);
    const auto H = sense_channel_freq(only, 1, cfg.grid);
    const auto lead = leading_singular(&H[0], 16);
    CHECK(cosine(lead.u, std::span<const cplx>(&h[0], 16)) > 1.0 - 1e-10);
  }
}

TEST_CASE("per-path contribution only rotates across slots") {
  const auto geo = ArrayGeometry::half_wavelength(2, 2, 0.0107);
  const auto grid = small_grid(8);
  const auto sc = random_paths(4, geo, 41);
  for (const auto& p : sc.paths) {
    const auto only = single_path(p, geo);
    const auto h0 = comm_channel_freq(only, 0, grid);
    const auto s0 = sense_channel_freq(only, 0, grid);
    for (std::size_t t = 1; t < 15; ++t) {
      const auto ht = comm_channel_freq(only, t, grid);
      const auto st = sense_channel_freq(only, t, grid);
      const cplx rot = std::polar(1.0, 2 * kPi * p.doppler * static_cast<double>(t) * only.slot_duration);
      for (std::size_t i = 0; i < h0.size(); ++i) {
        CHECK(std::abs(std::abs(ht[i]) - std::abs(h0[i])) < 1e-12);
        CHECK(std::abs(ht[i] - h0[i] * rot) < 1e-12);
      }
      for (std::size_t i = 0; i < s0.size(); ++i) CHECK(std::abs(std::abs(st[i]) - std::abs(s0[i])) < 1e-12);
    }
  }
}

TEST_CASE("delay view concentrates single-path energy near the true tap") {
  const auto geo = ArrayGeometry::half_wavelength(2, 2, 0.0107);
  const auto grid = small_grid(48);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double span = 1.0 / grid.subcarrier_spacing;
  for (int trial = 0; trial < 50; ++trial) {
    PathParams p;
    p.alpha = std::polar(1.0, 2 * kPi * u(rng));
    p.tau = u(rng) * 0.8 * span;
    p.elevation = u(rng) - 0.5;
    p.azimuth = u(rng) - 0.5;
    const auto h = comm_channel_freq(single_path(p, geo), 0, grid);
    const auto d = num::idft(h, 0);
    const double tap = p.tau * static_cast<double>(grid.k) * grid.subcarrier_spacing;
    for (std::size_t n = 0; n < 4; ++n) {
      double near = 0, total = 0;
      for (std::size_t k = 0; k < grid.k; ++k) {
        const double e = std::norm(d[k * 4 + n]);
        total += e;
        double dist = std::abs(static_cast<double>(k) - tap);
        dist = std::min(dist, static_cast<double>(grid.k) - dist);
        if (dist <= 2.0) near += e;
      }
      CHECK(near >= 0.9 * total);
    }
  }
}

TEST_CASE("dataset record shapes follow the window contract") {
  DatasetConfig cfg;
  const auto d = generate_dataset(cfg, 1, 2024);
  REQUIRE(d.size() == 1);
  CHECK(d.samples[0].comm.shape() == num::Shape{15, 48, 16});
  CHECK(d.samples[0].sense.shape() == num::Shape{10, 48, 16, 16});
  CHECK(d.header.p == 10);
  CHECK(d.header.q == 5);
  CHECK(d.header.speeds_kmh.size() == 1);
  CHECK(d.header.speeds_kmh[0] >= 10.0);
  CHECK(d.header.speeds_kmh[0] <= 100.0);
}

TEST_CASE("same seed gives byte-identical dataset files") {
  DatasetConfig cfg;
  cfg.scenario.grid = small_grid(16);
  cfg.scenario.n_v = 2;
  cfg.scenario.n_h = 2;
  const auto dir = std::filesystem::temp_directory_path() / "isac_dataset_test";
  std::filesystem::create_directories(dir);
  write_dataset(dir / "a.isac", generate_dataset(cfg, 6, 7));
  write_dataset(dir / "b.isac", generate_dataset(cfg, 6, 7));
  const auto a = num::read_file_bytes(dir / "a.isac");
  const auto b = num::read_file_bytes(dir / "b.isac");
  CHECK(a == b);
  const auto back = read_dataset(dir / "a.isac");
  const auto orig = generate_dataset(cfg, 6, 7);
  REQUIRE(back.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(back.samples[i].comm == orig.samples[i].comm);
    CHECK(back.samples[i].sense == orig.samples[i].sense);
    CHECK(back.samples[i].speed_kmh == orig.samples[i].speed_kmh);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("mean comm power matches configured total within 5%") {
  DatasetConfig cfg;
  cfg.scenario.grid = small_grid(16);
  cfg.scenario.n_v = 2;
  cfg.scenario.n_h = 2;
  cfg.scenario.power_total = 2.5;
  const auto d = generate_dataset(cfg, 500, 314);
  double comm = 0, sense = 0;
  std::size_t nc = 0, ns = 0;
  for (const auto& s : d.samples) {
    for (const auto& v : s.comm.data()) comm += std::norm(v);
    for (const auto& v : s.sense.data()) sense += std::norm(v);
    nc += s.comm.size();
    ns += s.sense.size();
  }
  CHECK(comm / static_cast<double>(nc) == doctest::Approx(2.5).epsilon(0.05));
  CHECK(sense / static_cast<double>(ns) == doctest::Approx(2.5).epsilon(0.05));
}

TEST_CASE("unwritable dataset path is an I/O error") {
  DatasetConfig cfg;
  cfg.scenario.grid = small_grid(4);
  cfg.scenario.n_v = 1;
  cfg.scenario.n_h = 1;
  const auto d = generate_dataset(cfg, 1, 1);
  CHECK_THROWS_AS(write_dataset("/nonexistent-dir/x/y.isac", d), IoError);
  CHECK_THROWS_AS(read_dataset("/nonexistent-dir/x/y.isac"), IoError);
}

TEST_CASE("truncated dataset bytes are rejected") {
  DatasetConfig cfg;
  cfg.scenario.grid = small_grid(4);
  cfg.scenario.n_v = 1;
  cfg.scenario.n_h = 1;
  auto bytes = serialize_dataset(generate_dataset(cfg, 2, 1));
  bytes.pop_back();
  CHECK_THROWS_AS(deserialize_dataset(bytes), IoError);
  bytes[0] = 'X';
  CHECK_THROWS_AS(deserialize_dataset(bytes), IoError);
}
