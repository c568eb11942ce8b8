#include <doctest.h>

#include <cmath>
#include <random>

#include "jjphoton/constants.hpp"
#include "jjphoton/error.hpp"
#include "jjphoton/network.hpp"
#include "jjphoton/network_io.hpp"

using namespace jjphoton;
using namespace jjphoton::network;

namespace {

double max_singular(const Eigen::MatrixXcd& s) {
  return Eigen::JacobiSVD<Eigen::MatrixXcd>(s).singularValues()(0);
}

std::vector<double> sweep(double lo, double hi, double step) {
  std::vector<double> f;
  for (double x = lo; x < hi; x += step) f.push_back(x);
  return f;
}

}  // namespace

TEST_CASE("resistor to ground stamps 1/R") {
  CircuitModel m({"a"}, "g");
  m.add(Resistor{50.0}, {"a", "g"});
  const auto y = assemble_admittance(m, 1e9);
  REQUIRE(y.y.rows() == 1);
  CHECK(std::abs(y.y(0, 0) - cplx{1.0 / 50.0, 0.0}) < 1e-15);
}

TEST_CASE("quarter-wave transformer gives Z0^2 / Z_L") {
  const double f0 = 6e9;
  CircuitModel m({"a", "b"}, "g");
  m.add(TransmissionLine{50.0, 1.0 / (4 * f0)}, {"a", "b"});
  m.add_port("b", 25.0);
  const std::vector<double> f{f0};
  const auto z = input_impedance(m, "a", f);
  CHECK(z.z[0].real() == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(std::abs(z.z[0].imag()) < 1e-6);
}

TEST_CASE("matched through line") {
  CircuitModel m({"a", "b"}, "g");
  m.add(TransmissionLine{50.0, 37e-12}, {"a", "b"});
  m.add_port("a", 50.0);
  m.add_port("b", 50.0);
  const auto s = s_parameters(m, sweep(1e9, 10e9, 0.7e9));
  for (const auto& sf : s.s) {
    CHECK(std::abs(sf(0, 0)) < 1e-12);
    CHECK(std::abs(sf(1, 0)) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("parallel RLC at resonance presents R") {
  const double l = 2e-9, c = 0.5e-12, r = 300.0;
  CircuitModel m({"a"}, "g");
  m.add(Resistor{r}, {"a", "g"});
  m.add(Inductor{l}, {"a", "g"});
  m.add(Capacitor{c}, {"a", "g"});
  const std::vector<double> f{1.0 / (2 * phys::pi * std::sqrt(l * c))};
  const auto z = input_impedance(m, "a", f);
  CHECK(z.z[0].real() == doctest::Approx(r).epsilon(1e-9));
  CHECK(std::abs(z.z[0].imag()) < 1e-6 * r);
}

TEST_CASE("series capacitor impedance grows toward DC") {
  CircuitModel m({"a"}, "g");
  m.add(Capacitor{1e-12}, {"a", "g"});
  const std::vector<double> f{1e9, 1e8, 1e7, 1e6, 1e5};
  const auto z = input_impedance(m, "a", f);
  for (std::size_t i = 1; i < f.size(); ++i) CHECK(std::abs(z.z[i]) > std::abs(z.z[i - 1]));
  CHECK(std::abs(z.z.back()) == doctest::Approx(1 / (2 * phys::pi * 1e5 * 1e-12)).epsilon(1e-9));
}

TEST_CASE("coupled-line coupler transforms the 50 Ohm port to about 24 Ohm") {
  BeamsplitterParams bp;
  const double tau = 1 / (4 * bp.f0);
  CircuitModel m({"c", "ca", "rf"}, "g");
  m.add(CoupledLine{bp.cap_coupling, bp.cap_total, bp.velocity * tau, bp.velocity}, {"c", "ca", "rf", "g"});
  m.add_port("rf", 50.0);
  const std::vector<double> f{bp.f0 * (1 + 1e-9)};
  const auto z = input_impedance(m, "c", f);
  CHECK(z.z[0].real() == doctest::Approx(24.0).epsilon(0.02));
}

TEST_CASE("beamsplitter: DC port reflects and RF ports show a transmission dip at resonance") {
  const auto bs = beamsplitter_network({});
  const std::vector<double> f{5e9 + 1.25e6, 6e9 + 1.25e6};
  const auto s = s_parameters(bs, f);
  CHECK(std::abs(s.s[1](0, 0)) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(std::abs(s.s[1](1, 2)) < 0.05 * std::abs(s.s[0](1, 2)));
}

TEST_CASE("line pole gives a flagged NaN row") {
  const std::vector<double> f{6e9};
  const auto s = s_parameters(beamsplitter_network({}), f);
  CHECK(std::isnan(std::abs(s.s[0](0, 0))));
  CHECK_FALSE(s.warnings.empty());
}

TEST_CASE("SQUID inductance") {
  const double l0 = squid_inductance(0.85e-9, 0.0);
  CHECK(l0 == doctest::Approx(387.2e-9).epsilon(1e-3));
  CHECK(squid_inductance(0.85e-9, phys::flux_quantum / 3) == doctest::Approx(2 * l0).epsilon(1e-12));
  CHECK(std::isinf(squid_inductance(0.85e-9, phys::flux_quantum / 2)));
  CHECK_THROWS_AS(squid_inductance(0.0, 0.0), InvalidModel);
}

TEST_CASE("anti-resonance frequency") {
  const double l = 4.93e-9, c = 142e-15;
  CHECK(anti_resonance_frequency(l, c, infinite_inductance) ==
        doctest::Approx(1 / (2 * phys::pi * std::sqrt(l * c))).epsilon(1e-14));
  CHECK(anti_resonance_frequency(l, c, 200e-9) > anti_resonance_frequency(l, c, 400e-9));
}

TEST_CASE("quarter-wave resonator summary") {
  const auto modes = resonator_summary(146.0, 1 / (4 * 6e9), 12.0, 2);
  REQUIRE(modes.size() == 3);
  CHECK(modes[0].frequency == doctest::Approx(6e9));
  CHECK(modes[0].quality == doctest::Approx(9.6).epsilon(0.01));
  CHECK(modes[1].quality == doctest::Approx(modes[0].quality / 3).epsilon(1e-14));
  CHECK(modes[0].impedance == doctest::Approx(4 * 146 / phys::pi).epsilon(1e-14));
  CHECK(modes[0].impedance == doctest::Approx(186.0).epsilon(0.001));
}

TEST_CASE("paper environment: Re Z peaks near 6 GHz with a 575 MHz wide line") {
  const auto env = junction_environment({});
  const auto f = sweep(4e9 + 0.125e6, 8e9, 0.25e6);
  const auto z = input_impedance(env, junction_plus, f, junction_minus);
  std::size_t k = 0;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (z.z[i].real() > z.z[k].real()) k = i;
  CHECK(f[k] == doctest::Approx(6e9).epsilon(0.02));
  std::size_t lo = k, hi = k;
  while (z.z[lo].real() > 0.5 * z.z[k].real()) --lo;
  while (z.z[hi].real() > 0.5 * z.z[k].real()) ++hi;
  CHECK(f[hi] - f[lo] == doctest::Approx(575e6).epsilon(0.15));
}

TEST_CASE("reciprocity and passivity of the beamsplitter") {
  const auto s = s_parameters(beamsplitter_network({}), sweep(1e9 + 1.1e6, 12e9, 37e6));
  for (const auto& m : s.s) {
    if (!m.allFinite()) continue;
    CHECK((m - m.transpose()).norm() < 1e-10 * m.norm());
    CHECK(max_singular(m) <= 1 + 1e-9);
  }
}

TEST_CASE("Re Z is non-negative for the passive environment") {
  const auto z = input_impedance(junction_environment({}), junction_plus,
                                 sweep(0.01e9 + 0.3e6, 40e9, 7.3e6), junction_minus);
  double zmax = 0;
  for (auto v : z.z) zmax = std::max(zmax, std::abs(v));
  for (auto v : z.z) CHECK(v.real() >= -1e-12 * zmax);
}

TEST_CASE("Schur-complement port reduction matches a full solve on random lumped networks") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<std::string> nodes{"n0", "n1", "n2", "n3", "n4", "n5"};
  for (int trial = 0; trial < 20; ++trial) {
    CircuitModel m(nodes, "g");
    for (const auto& a : nodes) m.add(Resistor{50 + 1000 * u(rng)}, {a, "g"});
    for (std::size_t i = 0; i < nodes.size(); ++i)
      for (std::size_t j = i + 1; j < nodes.size(); ++j) {
        const double pick = u(rng);
        if (pick < 0.3) m.add(Resistor{10 + 500 * u(rng)}, {nodes[i], nodes[j]});
        else if (pick < 0.6) m.add(Capacitor{1e-13 + 1e-12 * u(rng)}, {nodes[i], nodes[j]});
        else if (pick < 0.8) m.add(Inductor{1e-10 + 5e-9 * u(rng)}, {nodes[i], nodes[j]});
      }
    m.add_port("n0", 50.0);
    m.add_port("n3", 50.0);
    const double f = 1e9 + 5e9 * u(rng);
    const std::vector<double> fs{f};
    const auto s = s_parameters(m, fs).s[0];

    // Full nodal solve: port Z-matrix from the inverse of Y, then S.
    const Eigen::MatrixXcd zfull = assemble_admittance(m, f).y.inverse();
    const int p[2] = {m.index("n0"), m.index("n3")};
    Eigen::Matrix2cd zp;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) zp(a, b) = zfull(p[a], p[b]);
    const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity() * 50.0;
    const Eigen::Matrix2cd expect = (zp - id) * (zp + id).inverse();
    CHECK((s - expect).norm() < 1e-9 * expect.norm());
  }
}

TEST_CASE("admittance is even in SQUID flux") {
  BeamsplitterParams bp;
  bp.squid = SquidInductor{0.85e-9, 0.23 * phys::flux_quantum};
  const auto a = assemble_admittance(beamsplitter_network(bp), 5.7e9).y;
  bp.squid->flux = -bp.squid->flux;
  const auto b = assemble_admittance(beamsplitter_network(bp), 5.7e9).y;
  CHECK((a - b).norm() == 0.0);
}

TEST_CASE("frequency sweeps do not depend on the thread count") {
  const auto f = sweep(4e9 + 0.3e6, 8e9, 13e6);
  const auto a = s_parameters(beamsplitter_network({}), f, 1);
  const auto b = s_parameters(beamsplitter_network({}), f, 3);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK((a.s[i] - b.s[i]).norm() == 0.0);
}

TEST_CASE("invalid models are rejected") {
  CircuitModel m({"a"}, "g");
  m.add(Resistor{-1.0}, {"a", "g"});
  CHECK_THROWS_AS(m.validate(), InvalidModel);
  CircuitModel z({"a", "b"}, "g");
  z.add(TransmissionLine{50.0, 0.0}, {"a", "b"});
  CHECK_THROWS_AS(assemble_admittance(z, 1e9), InvalidModel);
  CircuitModel u({"a"}, "g");
  u.add(Resistor{1.0}, {"a", "missing"});
  CHECK_THROWS_AS(u.validate(), InvalidModel);
}

TEST_CASE("netlist JSON round trip") {
  BeamsplitterParams bp;
  bp.squid = SquidInductor{0.85e-9, 0.1 * phys::flux_quantum};
  const auto m = beamsplitter_network(bp);
  const auto back = netlist_from_json(netlist_to_json(m));
  const std::vector<double> f{5.5e9, 6.3e9};
  const auto a = s_parameters(m, f), b = s_parameters(back, f);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK((a.s[i] - b.s[i]).norm() == 0.0);
  auto bad = netlist_to_json(m);
  bad["elements"][0]["colour"] = "red";
  CHECK_THROWS_AS(netlist_from_json(bad), ConfigError);
}
