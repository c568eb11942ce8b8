#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "jjphoton/constants.hpp"
#include "jjphoton/error.hpp"
#include "jjphoton/pe_io.hpp"
#include "jjphoton/pe_theory.hpp"
#include "oracles.hpp"

using namespace jjphoton;
using namespace jjphoton::pe;

namespace {

const EnvironmentImpedance& paper_z() {
  static const auto z = environment_from_circuit(network::junction_environment({}),
                                                 network::junction_plus, network::junction_minus,
                                                 40e9, 1.25e6);
  return z;
}

const PEFunction& paper_pe() {
  static const auto p = solve_minnhagen(paper_z(), 21e-3, FrequencyGrid::symmetric(40e9, 10e6));
  return p;
}

double mass(const PEFunction& p, double lo, double hi) {
  double s = 0;
  for (std::size_t k = 0; k < p.grid.n; ++k)
    if (p.grid.at(k) >= lo && p.grid.at(k) < hi) s += p.values[k] * p.grid.df;
  return s;
}

double peak_near(const PEFunction& p, double lo, double hi) {
  std::size_t best = 0;
  double v = -1;
  for (std::size_t k = 0; k < p.grid.n; ++k)
    if (p.grid.at(k) >= lo && p.grid.at(k) < hi && p.values[k] > v) {
      v = p.values[k];
      best = k;
    }
  return p.grid.at(best);
}

// Ohmic background plus one Lorentzian mode at 5 GHz.
double single_mode(double f, double background) {
  if (f > 40e9) return 0.0;
  const double g = 100e6;
  return background + 1e4 * g * g / ((f - 5e9) * (f - 5e9) + g * g);
}

}  // namespace

TEST_CASE("frequency grids") {
  const auto g = FrequencyGrid::symmetric(40e9, 10e6);
  CHECK(g.n == 8000);
  CHECK(g.is_symmetric());
  CHECK(g.at(4000) == doctest::Approx(5e6));
  CHECK_FALSE(FrequencyGrid::uniform(0, 10e6, 10).is_symmetric());
  CHECK_THROWS_AS(FrequencyGrid::uniform(0, -1, 10).validate(), InvalidModel);
}

TEST_CASE("paper circuit: normalization, detailed balance and the four peaks") {
  const auto& p = paper_pe();
  const auto chk = check_pe(p);
  CHECK(std::abs(chk.norm_residual) <= 1e-4);
  CHECK(std::abs(chk.balance_residual) <= 1e-6);
  for (double v : p.values) CHECK(v >= 0);
  // Peaks: charging energy, plus one and two resonator photons, plus the 3f0 mode.
  const double ec = phys::charging_frequency(56.7e-15);
  CHECK(peak_near(p, 0.5e9, 3e9) == doctest::Approx(ec).epsilon(0.06));
  CHECK(peak_near(p, 6e9, 9e9) == doctest::Approx(7.5e9).epsilon(0.04));
  CHECK(peak_near(p, 12e9, 15e9) == doctest::Approx(13.5e9).epsilon(0.04));
  CHECK(peak_near(p, 18e9, 21e9) == doctest::Approx(19.5e9).epsilon(0.04));
}

TEST_CASE("detailed-balance ratio at 1 GHz") {
  const auto& p = paper_pe();
  const double nu = 0.995e9;  // grid point (99 + 1/2) * 10 MHz
  const double ratio = p.at(-nu) / p.at(nu);
  const double expect = std::exp(-phys::h * nu / (phys::k_B * 21e-3));
  CHECK(ratio == doctest::Approx(expect).epsilon(1e-6));
  CHECK(expect == doctest::Approx(0.103).epsilon(0.01));
}

TEST_CASE("Minnhagen solution agrees with the characteristic-function oracle") {
  const auto& p = paper_pe();
  const auto o = oracle::pe_characteristic({}, 21e-3, 10e6, 40e9);
  const double peak = *std::max_element(p.values.begin(), p.values.end());
  double worst = 0;
  for (std::size_t k = 0; k < p.grid.n; ++k) worst = std::max(worst, std::abs(p.values[k] - o.p[k]));
  CHECK(worst < 0.01 * peak);
}

TEST_CASE("single-mode environment against the oracle") {
  const double t = 50e-3;
  const auto re_z = [](double f) { return single_mode(f, 100.0); };
  const auto z = environment_from_function(re_z, 40e9, 1.25e6, "single mode");
  const auto p = solve_minnhagen(z, t, FrequencyGrid::symmetric(40e9, 10e6));
  const auto o = oracle::pe_characteristic(re_z, 40e9, t, 10e6, 40e9, 60e-9);
  const double peak = *std::max_element(p.values.begin(), p.values.end());
  double worst = 0;
  for (std::size_t k = 0; k < p.grid.n; ++k) worst = std::max(worst, std::abs(p.values[k] - o.p[k]));
  CHECK(worst < 0.01 * peak);
  for (int n = 0; n < 3; ++n) {
    const double lo = 5e9 * n - 2.5e9, hi = 5e9 * n + 2.5e9;
    double ao = 0;
    for (std::size_t k = 0; k < o.nu.size(); ++k)
      if (o.nu[k] >= lo && o.nu[k] < hi) ao += o.p[k] * o.df;
    CHECK(mass(p, lo, hi) == doctest::Approx(ao).epsilon(0.01));
  }
}

TEST_CASE("single-mode environment: Poisson photon sidebands") {
  // Nearly bare mode: sideband areas a_n follow a_{n+1}/a_n = rho/(n+1), with
  // rho = 2 int Re Z / (R_Q f) df over the line.
  const auto re_z = [](double f) { return single_mode(f, 1.0); };
  const auto z = environment_from_function(re_z, 40e9, 1.25e6, "single mode");
  const auto p = solve_minnhagen(z, 50e-3, FrequencyGrid::symmetric(40e9, 10e6));
  double rho = 0;
  for (double f = 2.5e9 + 0.05e6; f < 7.5e9; f += 0.1e6) rho += 2 * (re_z(f) - 1.0) / (phys::R_Q * f) * 0.1e6;
  double a[3];
  for (int n = 0; n < 3; ++n) a[n] = mass(p, 5e9 * n - 2.5e9, 5e9 * n + 2.5e9);
  CHECK(a[1] / a[0] == doctest::Approx(rho).epsilon(0.05));
  CHECK(a[2] / a[1] == doctest::Approx(rho / 2).epsilon(0.05));
}

TEST_CASE("weak environment collapses P to a thermal peak at zero") {
  const double t = 50e-3;
  const auto z = environment_from_function([](double f) { return f < 40e9 ? 1.0 : 0.0; }, 40e9, 1.25e6,
                                           "1 Ohm");
  const auto p = solve_minnhagen(z, t, FrequencyGrid::symmetric(20e9, 10e6));
  const double kt = phys::k_B * t / phys::h;
  CHECK(mass(p, -5 * kt, 5 * kt) > 0.99);
}

TEST_CASE("grid refinement stability") {
  const auto coarse = paper_pe();
  const auto fine = solve_minnhagen(paper_z(), 21e-3, FrequencyGrid::symmetric(40e9, 5e6));
  for (double c : {1.5e9, 7.5e9, 13.5e9}) {
    const double lo = c - 2e9, hi = c + 2e9;
    CHECK(std::abs(peak_near(coarse, lo, hi) - peak_near(fine, lo, hi)) < coarse.grid.df);
    CHECK(mass(fine, lo, hi) == doctest::Approx(mass(coarse, lo, hi)).epsilon(0.005));
  }
}

TEST_CASE("solver rejects T <= 0") {
  CHECK_THROWS_AS(solve_minnhagen(paper_z(), 0.0, FrequencyGrid::symmetric(40e9, 10e6)), InvalidModel);
}

TEST_CASE("emission map scaling, zeros and ridge") {
  const auto fg = FrequencyGrid::uniform(4e9, 10e6, 401);
  const auto vg = FrequencyGrid::uniform(5e6, 10e6, 3000);
  const auto a = emission_rate_density(paper_pe(), paper_z(), {0.85e-9}, fg, vg);
  const auto b = emission_rate_density(paper_pe(), paper_z(), {1.7e-9}, fg, vg);
  for (std::size_t i = 0; i < a.gamma.size(); ++i) {
    CHECK(b.gamma[i] == doctest::Approx(4 * a.gamma[i]).epsilon(1e-14));
    CHECK(a.gamma[i] >= 0);
  }

  // Band profile is the trapezoid integral of each bias row over the band.
  const auto profile = band_profile(a, 4.2e9, 4.7e9);
  for (std::size_t i = 0; i < vg.n; i += 37) {
    double s = 0;
    for (std::size_t j = 20; j <= 70; ++j) s += a.gamma[i * fg.n + j] * (j == 20 || j == 70 ? 0.5 : 1.0);
    CHECK(profile[i] == doctest::Approx(s * fg.df).epsilon(1e-9));
  }

  const auto gap = environment_from_function(
      [](double f) { return f > 4e9 && f < 5e9 ? 0.0 : 50.0; }, 40e9, 1.25e6, "gap");
  const auto pg = solve_minnhagen(gap, 21e-3, FrequencyGrid::symmetric(40e9, 10e6));
  const auto m = emission_rate_density(pg, gap, {1e-9}, FrequencyGrid::uniform(4.1e9, 10e6, 50), vg);
  for (double v : m.gamma) CHECK(v == 0.0);

  CHECK_THROWS(emission_rate_density(paper_pe(), paper_z(), {1e-9}, fg,
                                     FrequencyGrid::uniform(50e9, 10e6, 10)));
}

TEST_CASE("tunneling and band rates") {
  const auto& p = paper_pe();
  CHECK(tunneling_rate(p, {1.7e-9}, 1.3e9) == doctest::Approx(4 * tunneling_rate(p, {0.85e-9}, 1.3e9)));
  // Maximal at the charging peak over a bias sweep.
  double best = 0, at = 0;
  for (double vj = 0.105e9; vj < 30e9; vj += 0.01e9) {
    const double g = tunneling_rate(p, {0.85e-9}, vj);
    if (g > best) {
      best = g;
      at = vj;
    }
  }
  CHECK(std::abs(at - peak_near(p, 0.5e9, 3e9)) < 20e6);

  EmissionMap flat;
  flat.f_grid = FrequencyGrid::uniform(4e9, 10e6, 101);
  flat.vj_grid = FrequencyGrid::uniform(5e9, 10e6, 3);
  flat.gamma.assign(303, 2.5);
  CHECK(band_rate(flat, 4.2e9, 4.7e9, 5.01e9) == doctest::Approx(2.5 * 0.5e9));
  CHECK_THROWS(band_rate(flat, 4.5e9, 4.5e9, 5.01e9));
}

TEST_CASE("check_pe reports violations") {
  PEFunction p = paper_pe();
  for (double& v : p.values) v *= 2;
  CHECK(check_pe(p).norm_residual == doctest::Approx(1.0).epsilon(1e-4));
  PEFunction q = paper_pe();
  for (std::size_t k = 0; k < q.grid.n / 2; ++k) q.values[k] *= 1.5;
  CHECK(check_pe(q).balance_residual > 0.1);
}

TEST_CASE("P and map CSV round trip") {
  const auto& p = paper_pe();
  const auto back = pe_from_csv(pe_to_csv(p), p.beta);
  REQUIRE(back.grid.n == p.grid.n);
  for (std::size_t k = 0; k < p.grid.n; k += 97) CHECK(back.values[k] == p.values[k]);
  const auto m = emission_rate_density(p, paper_z(), {0.85e-9}, FrequencyGrid::uniform(4e9, 10e6, 11),
                                       FrequencyGrid::uniform(5e9, 10e6, 7));
  const auto mb = map_from_csv(map_to_csv(m));
  CHECK(mb.gamma == m.gamma);
}
