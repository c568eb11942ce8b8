#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "jjphoton/circuit_fit.hpp"
#include "jjphoton/constants.hpp"
#include "jjphoton/error.hpp"
#include "jjphoton/extraction.hpp"

using namespace jjphoton;
using namespace jjphoton::extraction;
using pe::FrequencyGrid;

namespace {

const FrequencyGrid f_grid = FrequencyGrid::uniform(4e9, 10e6, 401);
const FrequencyGrid vj_grid = FrequencyGrid::uniform(5e6, 10e6, 3000);

struct Synth {
  pe::EnvironmentImpedance z;
  pe::PEFunction p;
  pe::EmissionMap map;
};

Synth synth(double t, double ic) {
  Synth s;
  s.z = pe::environment_from_circuit(network::junction_environment({}), network::junction_plus,
                                     network::junction_minus, 40e9, 1.25e6);
  s.p = pe::solve_minnhagen(s.z, t, FrequencyGrid::symmetric(40e9, 10e6));
  s.map = pe::emission_rate_density(s.p, s.z, {ic}, f_grid, vj_grid);
  return s;
}

const Synth& paper() {
  static const Synth s = synth(21e-3, 0.85e-9);
  return s;
}

double peak_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

}  // namespace

TEST_CASE("extract_pe recovers the forward P and ignores overall scale") {
  const auto& s = paper();
  const auto got = extract_pe(s.map, signal_sigma_p(s.map));
  // The extracted P is normalized over the window the map reaches, so the
  // truth is renormalized over the same window.
  double in_window = 0;
  for (std::size_t k = 0; k < got.pe.grid.n; ++k) in_window += s.p.at(got.pe.grid.at(k)) * got.pe.grid.df;
  CHECK(in_window < 1.0);
  const double peak = peak_of(s.p.values) / in_window;
  double worst = 0;
  for (std::size_t k = 0; k < got.pe.grid.n; ++k) {
    const double nu = got.pe.grid.at(k);
    worst = std::max(worst, std::abs(got.pe.values[k] - s.p.at(nu) / in_window));
  }
  CHECK(worst < 0.01 * peak);

  auto scaled = s.map;
  for (double& g : scaled.gamma) g *= 37.0;
  const auto again = extract_pe(scaled, signal_sigma_p(scaled));
  for (std::size_t k = 0; k < got.pe.grid.n; k += 13)
    CHECK(again.pe.values[k] == doctest::Approx(got.pe.values[k]).epsilon(1e-12));
}

TEST_CASE("extract_beta is exact on a balanced P") {
  const auto& s = paper();
  const auto b = extract_beta(s.p, default_sigma_beta(s.p));
  CHECK(b.t_eff == doctest::Approx(21e-3).epsilon(1e-3));
}

TEST_CASE("extract_ic scales as the square root of the map") {
  const auto& s = paper();
  const auto sv = dog_sigma_v(s.p);
  const double ic = extract_ic(s.map, s.p, s.p.beta, sv).ic;
  auto scaled = s.map;
  for (double& g : scaled.gamma) g *= 4.0;
  CHECK(extract_ic(scaled, s.p, s.p.beta, sv).ic == doctest::Approx(2 * ic).epsilon(1e-12));
}

TEST_CASE("extract_impedance of an empty map is zero") {
  auto m = paper().map;
  std::fill(m.gamma.begin(), m.gamma.end(), 0.0);
  const auto z = extract_impedance(m, 1e-9);
  for (double v : z.re_z) CHECK(v == 0.0);
}

TEST_CASE("full round trip over temperature and critical current") {
  for (double t : {15e-3, 21e-3, 40e-3}) {
    for (double ic : {0.2e-9, 0.85e-9, 2.0e-9}) {
      CAPTURE(t);
      CAPTURE(ic);
      const auto s = synth(t, ic);
      const auto r = extract_all(s.map);
      CHECK(r.t_eff == doctest::Approx(t).epsilon(0.05));
      CHECK(r.ic == doctest::Approx(ic).epsilon(0.05));
      double zpk = 0, zerr = 0;
      for (std::size_t j = 0; j < f_grid.n; ++j) {
        const double f = f_grid.at(j);
        zpk = std::max(zpk, s.z(f));
        zerr = std::max(zerr, std::abs(r.z_extracted(f) - s.z(f)));
      }
      CHECK(zerr < 0.02 * zpk);
      CHECK(std::abs(check_pe(r.pe).balance_residual) < 0.05);
    }
  }
}

TEST_CASE("extraction is insensitive to the weight choice") {
  const auto& s = paper();
  const auto a = extract_all(s.map);
  ExtractionOptions alt;
  alt.flat_sigma_p = true;
  alt.dog_sigma_v = true;
  const auto b = extract_all(s.map, alt);
  CHECK(b.t_eff == doctest::Approx(a.t_eff).epsilon(0.05));
  CHECK(b.ic == doctest::Approx(a.ic).epsilon(0.05));
}

TEST_CASE("extraction is a pure function of the sampled field") {
  const auto& s = paper();
  const auto a = extract_all(s.map);
  const auto b = extract_all(s.map);
  CHECK(a.ic == b.ic);
  CHECK(a.t_eff == b.t_eff);
  CHECK(a.z_extracted.re_z == b.z_extracted.re_z);
}

TEST_CASE("missing negative-energy signal is an error") {
  auto p = paper().p;
  for (std::size_t k = 0; k < p.grid.n; ++k)
    if (p.grid.at(k) < 0) p.values[k] = 0;
  CHECK_THROWS_AS(extract_beta(p, default_sigma_beta(paper().p)), NumericalError);
}

TEST_CASE("circuit fit started at the truth stays there") {
  const CircuitParams truth;
  const auto fg = FrequencyGrid::uniform(4e9, 40e6, 101);
  const auto vg = FrequencyGrid::uniform(5e6, 40e6, 750);
  const auto data = forward_map(truth, {}, fg, vg);
  FitOptions opts;
  opts.max_iter = 3;
  const auto fit = fit_circuit(data, 32.1e3, truth, opts);
  for (int i = 0; i < CircuitParams::size; ++i) CHECK(fit.params[i] == doctest::Approx(truth[i]).epsilon(1e-6));
  CHECK(fit.residual_norm < 1e-6);
  CHECK(fit.ec_hz == doctest::Approx(phys::charging_frequency(truth.c)));
}

TEST_CASE("circuit fit validates its start") {
  CircuitParams bad;
  bad.c = 1e-12;
  const auto data = forward_map({}, {}, FrequencyGrid::uniform(4e9, 40e6, 11), FrequencyGrid::uniform(5e6, 40e6, 10));
  CHECK_THROWS_AS(fit_circuit(data, 32.1e3, bad), InvalidModel);
  CHECK_FALSE(FitBounds{}.contains(bad));
}
