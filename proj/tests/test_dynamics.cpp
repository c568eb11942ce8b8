#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "jjphoton/constants.hpp"
#include "jjphoton/dynamics.hpp"
#include "jjphoton/error.hpp"

using namespace jjphoton;
using namespace jjphoton::dynamics;

namespace {

SourceParams blockaded() {
  SourceParams p;
  p.base_rate = 0.3 / p.rc_time;
  p.charging_energy = phys::charging_frequency(56.7e-15) * phys::h;
  return p;
}

}  // namespace

TEST_CASE("no back-action gives a Poisson process") {
  SourceParams p;
  p.base_rate = 1e8;
  const auto rec = simulate_source(p, 2e-4, 3);
  std::vector<double> gaps;
  for (std::size_t i = 1; i < rec.times.size(); ++i) gaps.push_back(rec.times[i] - rec.times[i - 1]);
  std::sort(gaps.begin(), gaps.end());
  // Kolmogorov-Smirnov distance to the exponential law.
  double d = 0;
  const auto n = static_cast<double>(gaps.size());
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    const double cdf = 1 - std::exp(-p.base_rate * gaps[i]);
    d = std::max({d, std::abs(cdf - static_cast<double>(i) / n), std::abs(cdf - static_cast<double>(i + 1) / n)});
  }
  CHECK(d < 1.628 / std::sqrt(n));
}

TEST_CASE("permanent blockade allows one event") {
  auto p = blockaded();
  p.rc_time = 1e3;
  const auto rec = simulate_source(p, 1e-5, 1);
  CHECK(rec.times.size() <= 1);
}

TEST_CASE("renewal oracle limits") {
  const auto flat = renewal_g2_oracle([](double) { return 1e8; }, 200e-9, 0.01e-9);
  for (double t : {0.0, 1e-9, 10e-9, 100e-9}) CHECK(flat(t) == doctest::Approx(1.0).epsilon(1e-3));
  const double d = 5e-9;
  const auto dead = renewal_g2_oracle([d](double t) { return t < d ? 0.0 : 1e9; }, 200e-9, 0.01e-9);
  for (double t : {0.0, 1e-9, 4.9e-9}) CHECK(dead(t) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(dead.steady_rate == doctest::Approx(1 / (d + 1e-9)).epsilon(1e-3));
  CHECK_THROWS(renewal_g2_oracle([](double) { return 0.0; }, 200e-9, 0.01e-9));
}

TEST_CASE("blockaded source matches the renewal oracle") {
  const auto p = blockaded();
  const auto rec = simulate_source(p, 4e-3, 11);
  const auto oracle = renewal_g2_oracle(after_event_hazard(p), 200e-9, 0.01e-9, p.rc_time);
  CHECK(rec.rate() == doctest::Approx(oracle.steady_rate).epsilon(0.01));
  const auto h = g2_from_events(rec, 0.25e-9, 12e-9);
  CHECK(h.g2.front() < 1.0);
  for (std::size_t i = 0; i < h.tau.size(); ++i) {
    CAPTURE(h.tau[i]);
    // 0.01 covers averaging over a bin against the pointwise oracle.
    CHECK(std::abs(h.g2[i] - oracle(h.tau[i])) < 3 * h.sigma[i] + 0.01);
  }
  CHECK(std::abs(h.g2.back() - 1) < 3 * h.sigma.back());
}

TEST_CASE("Poisson record has flat g2") {
  SourceParams p;
  p.base_rate = 2e8;
  const auto h = g2_from_events(simulate_source(p, 5e-4, 7), 0.5e-9, 10e-9);
  for (std::size_t i = 0; i < h.tau.size(); ++i) CHECK(std::abs(h.g2[i] - 1) < 3.5 * h.sigma[i]);
  EventRecord few;
  few.duration = 1e-6;
  few.times = {1e-7};
  CHECK_THROWS_AS(g2_from_events(few, 1e-9, 1e-8), InvalidModel);
}

TEST_CASE("latched pulsed source emits at most once per period") {
  auto p = blockaded();
  p.drive.pulsed = true;
  p.latch.enabled = true;
  const auto rec = simulate_source(p, 2e-4, 5);
  REQUIRE(rec.times.size() > 1000);
  for (std::size_t i = 1; i < rec.times.size(); ++i) {
    const double a = std::floor((rec.times[i - 1] - p.drive.t_first) / p.drive.period);
    const double b = std::floor((rec.times[i] - p.drive.t_first) / p.drive.period);
    CHECK(a != b);
  }
  const auto h = g2_from_events(rec, 0.5e-9, 20e-9);
  auto at = [&](double t) {
    return h.g2[static_cast<std::size_t>(t / h.bin)];
  };
  CHECK(at(6.1e-9) > at(3.1e-9));
  CHECK(at(12.1e-9) > at(9.1e-9));
}

TEST_CASE("identical seeds give identical records") {
  const auto p = blockaded();
  const auto a = simulate_source(p, 1e-5, 42), b = simulate_source(p, 1e-5, 42);
  CHECK(a.times == b.times);
  CHECK(a.charge_after == b.charge_after);
  CHECK(simulate_source(p, 1e-5, 43).times != a.times);
}

TEST_CASE("island charge stays non-negative and relaxes") {
  const auto p = blockaded();
  const auto rec = simulate_source(p, 1e-6, 9);
  REQUIRE(!rec.times.empty());
  for (double q : rec.charge_after) CHECK(q >= 1.0);
  const double t = rec.times.front();
  CHECK(rec.charge_at(t + p.rc_time) < rec.charge_at(t));
  CHECK(rec.charge_at(t + p.rc_time) >= 0);
}

TEST_CASE("photon envelopes") {
  EventRecord one;
  one.duration = 5e-9;
  one.times = {1e-9};
  const double kappa = 1 / 0.28e-9, dt = 0.01e-9;
  const auto e = events_to_envelope(one, kappa, dt, 1.0, 1);
  const std::size_t i0 = 101, i1 = 129;  // one decay time apart, after the event
  CHECK(std::norm(e[i1]) / std::norm(e[i0]) == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));

  EventRecord none;
  none.duration = 5e-9;
  for (auto v : events_to_envelope(none, kappa, dt, 1.0, 1)) CHECK(v == cplx{});

  // Phase-averaged energies of separate packets add.
  EventRecord two;
  two.duration = 5e-9;
  two.times = {1e-9, 3e-9};
  double sum = 0, single = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    for (auto v : events_to_envelope(two, kappa, dt, 1.0, s)) sum += std::norm(v) * dt;
    for (auto v : events_to_envelope(one, kappa, dt, 1.0, s)) single += std::norm(v) * dt;
  }
  CHECK(sum / single == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("invalid source parameters are rejected") {
  SourceParams p;
  p.rc_time = 0;
  CHECK_THROWS_AS(p.validate(), InvalidModel);
  SourceParams q;
  q.kappa = -1;
  CHECK_THROWS_AS(simulate_source(q, 1e-6, 1), InvalidModel);
}
