#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "jjphoton/constants.hpp"
#include "jjphoton/correlator.hpp"
#include "jjphoton/dynamics.hpp"
#include "jjphoton/error.hpp"
#include "jjphoton/fft.hpp"
#include "oracles.hpp"

using namespace jjphoton;
using namespace jjphoton::correlator;

namespace {

ChainModel quiet_chain() {
  ChainModel c;
  c.vacuum = false;
  return c;
}

std::vector<cplx> white(std::size_t n, std::uint64_t seed, double power = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<cplx> x(n);
  const double s = std::sqrt(power / 2);
  for (auto& v : x) v = {s * nd(rng), s * nd(rng)};
  return x;
}

SourceFactory tone_source(cplx a) {
  return [a](std::uint64_t, std::size_t n, double) {
    return ChainInput{ClassicalInput{std::vector<cplx>(n, a)}};
  };
}

SourceFactory thermal_source() {
  return [](std::uint64_t seed, std::size_t n, double) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    const double rho = 0.7, amp = std::sqrt((1 - rho * rho) / 2);
    cplx a{nd(rng) * std::sqrt(0.5), nd(rng) * std::sqrt(0.5)};
    std::vector<cplx> x(n);
    for (auto& v : x) {
      a = rho * a + amp * cplx{nd(rng), nd(rng)};
      v = a;
    }
    return ChainInput{ClassicalInput{std::move(x)}};
  };
}

// Sum of (-1)^j k_j, the FIR gain at zero frequency.
double fir_dc(const ChainModel& c) {
  double s = 0;
  for (std::size_t j = 0; j < c.fir.size(); ++j) s += (j % 2 ? -1.0 : 1.0) * c.fir[j];
  return s;
}

}  // namespace

TEST_CASE("zero input without noise gives all-zero records") {
  const auto adc = simulate_chain(std::monostate{}, quiet_chain(), 512, 1);
  for (const auto& ch : adc.ch)
    for (double v : ch) CHECK(v == 0.0);
}

TEST_CASE("tone at f0 is sampled as a 1.5 GHz sinusoid of amplitude sqrt(g/2) times the input") {
  auto chain = quiet_chain();
  chain.gain = {4.0, 9.0};
  const cplx x{0.3, -0.4};
  const auto adc = simulate_chain(ClassicalInput{std::vector<cplx>(64, x)}, chain, 64, 1);
  for (int i = 0; i < 2; ++i)
    for (std::size_t n = 0; n < 64; ++n) {
      const double ph = 2 * phys::pi * 1.5e9 * 0.5e-9 * static_cast<double>(n);
      const double expect = std::sqrt(chain.gain[i] / 2) * (x * std::polar(1.0, ph)).real();
      CHECK(adc.ch[i][n] == doctest::Approx(expect).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("vacuum plus amplifier noise: flat raw spectrum at g (N + 1/2)") {
  ChainModel chain;
  chain.noise = {7, 7};
  chain.gain = {2.0, 2.0};
  const std::size_t n = 1 << 18, seg = 256;
  const auto adc = simulate_chain(std::monostate{}, chain, n, 3);
  // Real samples: variance g (N + 1/2) / 2, periodogram flat at that level.
  std::vector<double> psd(seg / 2 + 1, 0.0);
  for (std::size_t s = 0; s + seg <= n; s += seg) {
    const auto f = fft::forward_real(std::span<const double>(adc.ch[0]).subspan(s, seg), seg);
    for (std::size_t b = 0; b < psd.size(); ++b) psd[b] += std::norm(f[b]) / seg / (n / seg);
  }
  const double level = chain.gain[0] * 7.5 / 2;
  double mean = 0;
  for (std::size_t b = 1; b + 1 < psd.size(); ++b) mean += psd[b] / (psd.size() - 2);
  CHECK(mean == doctest::Approx(level).epsilon(0.01));
  for (std::size_t b = 1; b + 1 < psd.size(); ++b) CHECK(psd[b] == doctest::Approx(level).epsilon(0.15));
}

TEST_CASE("demodulated tone at f0 is a constant envelope") {
  auto chain = quiet_chain();
  chain.gain = {4.0, 4.0};
  const cplx x{0.6, 0.2};
  const std::size_t n = 2 * chain.block_size * 2;
  const auto env = demodulate_envelopes(simulate_chain(ClassicalInput{std::vector<cplx>(n, x)}, chain, n, 1), chain);
  const cplx expect = std::sqrt(chain.gain[0] * chain.split) * fir_dc(chain) * x;
  for (std::size_t m = chain.fir.size(); m < env.ch[0].size(); ++m)
    CHECK(std::abs(env.ch[0][m] - expect) < 1e-12);
  CHECK(std::abs(fir_response(chain, 0.0) - fir_dc(chain)) < 1e-15);
}

TEST_CASE("tone at f0 + delta rotates at delta") {
  auto chain = quiet_chain();
  const double delta = 20e6;
  const std::size_t n = 2048;
  std::vector<cplx> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = std::polar(1.0, 2 * phys::pi * delta * chain.dt * static_cast<double>(k));
  const auto env = demodulate_envelopes(simulate_chain(ClassicalInput{x}, chain, n, 1), chain);
  cplx acc{};
  double lo = 1e300, hi = 0;
  for (std::size_t m = 8; m + 1 < env.ch[0].size(); ++m) {
    acc += env.ch[0][m + 1] * std::conj(env.ch[0][m]);
    lo = std::min(lo, std::abs(env.ch[0][m]));
    hi = std::max(hi, std::abs(env.ch[0][m]));
  }
  CHECK(std::arg(acc) == doctest::Approx(2 * phys::pi * delta * chain.envelope_interval()).epsilon(1e-3));
  CHECK(hi / lo < 1.01);
}

TEST_CASE("white input: envelope spectrum follows |K(f)|^2") {
  auto chain = quiet_chain();
  chain.split = 1.0;
  const std::size_t seg = 64, segments = 8000, n = 2 * seg * segments;
  const auto env = demodulate_envelopes(simulate_chain(ClassicalInput{white(n, 9)}, chain, n, 1), chain);
  std::vector<double> psd(seg, 0.0);
  fft::FixedPlan plan(seg, true);
  for (std::size_t s = 1; s < segments; ++s) {
    auto in = plan.input();
    std::copy_n(env.ch[0].begin() + static_cast<long>(s * seg), seg, in.begin());
    const auto out = plan.execute();
    for (std::size_t b = 0; b < seg; ++b) psd[b] += std::norm(out[b]) / seg / (segments - 1);
  }
  for (std::size_t b = 0; b < seg; ++b) {
    const double f = (b < seg / 2 ? double(b) : double(b) - double(seg)) / (seg * chain.envelope_interval());
    CAPTURE(f);
    CHECK(psd[b] == doctest::Approx(std::norm(fir_response(chain, f))).epsilon(0.06));
  }
}

TEST_CASE("FFT correlators equal direct sliding sums") {
  std::mt19937_64 rng(2);
  for (std::size_t n : {std::size_t{8}, std::size_t{256}}) {
    const auto s0 = white(n, rng()), s1 = white(n, rng());
    Accumulator acc(n);
    acc.add_block(s0, s1);
    const auto r = acc.finalize(1.0);
    const auto d = oracle::direct_correlation(s0, s1);
    for (std::size_t i = 0; i < d.cross.size(); ++i) {
      CHECK(std::abs(r.cross[i] - d.cross[i]) < 1e-10 * std::abs(d.cross[n - 1]));
      CHECK(std::abs(r.product[i] - d.product[i]) < 1e-10 * std::abs(d.product[n - 1]));
    }
  }
}

TEST_CASE("Gamma1 cross of identical and of independent channels") {
  const std::size_t n = 128, blocks = 256;
  EnvelopeRecord env;
  env.dt = 1e-9;
  env.block_size = n;
  env.ch[0] = white(n * blocks, 4);
  env.ch[1] = env.ch[0];
  auto g = gamma1_cross(env);
  const std::size_t c = n - 1;
  CHECK(g.on[c].real() == doctest::Approx(1.0).epsilon(0.02));
  const double tol = 5 / std::sqrt(double(n * blocks));
  for (std::size_t i = 0; i < g.tau.size(); i += 7)
    if (i != c && std::abs(int(i) - int(c)) < 100) CHECK(std::abs(g.on[i]) < 2 * tol);

  env.ch[1] = white(n * blocks, 5);
  g = gamma1_cross(env);
  CHECK(std::abs(g.on[c]) < tol);
}

TEST_CASE("block statistics") {
  CHECK_THROWS_AS(block_statistics({{1.0}}), InvalidModel);
  const auto same = block_statistics({{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}});
  CHECK(same.sigma == std::vector<double>{0.0, 0.0});
  CHECK(same.mean == std::vector<double>{1.0, 2.0});

  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  int within = 0;
  double avg = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<double>> b(100, std::vector<double>(1));
    for (auto& v : b) v[0] = nd(rng);
    const double s = block_statistics(b).sigma[0];
    within += std::abs(s * std::sqrt(99.0) - 1) < 0.2;
    avg += s / 100;
  }
  CHECK(within >= 95);
  CHECK(avg * std::sqrt(99.0) == doctest::Approx(1.0).epsilon(0.02));

  // Log-log slope of sigma against n_b.
  std::vector<double> x, y;
  for (std::size_t nb : {25u, 100u, 400u, 1600u}) {
    std::vector<std::vector<double>> b(nb, std::vector<double>(200));
    for (auto& v : b)
      for (double& e : v) e = nd(rng);
    const auto s = block_statistics(b).sigma;
    x.push_back(std::log(double(nb)));
    y.push_back(std::log(std::accumulate(s.begin(), s.end(), 0.0) / s.size()));
  }
  const double slope = (y.back() - y.front()) / (x.back() - x.front());
  CHECK(slope == doctest::Approx(-0.5).epsilon(0.1));
}

TEST_CASE("noiseless coherent input assembles to g2 = 1") {
  ExperimentPlan plan;
  plan.chain = quiet_chain();
  plan.n_groups = 2;
  plan.pairs_per_group = 4;
  plan.max_lag = 6;
  const auto r = run_experiment(tone_source({0.5, 0.1}), plan).result;
  for (double g : r.g2) CHECK(g == doctest::Approx(1.0).epsilon(1e-10));
  // The FIR passes |K(0)|^2 of the power; load calibration folds it into the gain.
  const double k0 = fir_dc(plan.chain);
  for (auto g : r.g1) CHECK(std::abs(g - 0.26 * k0 * k0) < 1e-10);
}

TEST_CASE("g2 is invariant under scaling both gains") {
  ExperimentPlan plan;
  plan.chain.noise = {3, 3};
  plan.n_groups = 4;
  plan.pairs_per_group = 64;
  plan.max_lag = 4;
  const auto a = run_experiment(thermal_source(), plan).result;
  plan.chain.gain = {4.0, 4.0};
  const auto b = run_experiment(thermal_source(), plan).result;
  CHECK(a.g2 == b.g2);
  plan.chain.gain = {10.0, 10.0};
  const auto c = run_experiment(thermal_source(), plan).result;
  for (std::size_t i = 0; i < a.g2.size(); ++i) CHECK(c.g2[i] == doctest::Approx(a.g2[i]).epsilon(1e-9));
}

TEST_CASE("results do not depend on the worker count and repeat for a fixed seed") {
  ExperimentPlan plan;
  plan.chain.noise = {2, 2};
  plan.n_groups = 4;
  plan.pairs_per_group = 40;
  plan.max_lag = 4;
  plan.seed = 77;
  const auto a = run_experiment(thermal_source(), plan).result;
  plan.threads = 3;
  const auto b = run_experiment(thermal_source(), plan).result;
  CHECK(a.g2 == b.g2);
  CHECK(a.sigma_g2 == b.sigma_g2);
  CHECK(a.g1 == b.g1);
  plan.seed = 78;
  CHECK(run_experiment(thermal_source(), plan).result.g2 != a.g2);
}

TEST_CASE("off-state cross correlation vanishes without cross noise") {
  ExperimentPlan plan;
  plan.chain.noise = {7, 7};
  plan.n_groups = 4;
  plan.pairs_per_group = 512;
  plan.max_lag = 4;
  const auto ex = run_experiment(thermal_source(), plan);
  const auto& off = ex.pooled_off;
  const std::size_t c = off.tau.size() / 2;
  const double tol = 5 * off.auto0[c].real() / std::sqrt(double(off.n_blocks * plan.chain.block_size));
  CHECK(std::abs(off.cross[c]) < tol);
  CHECK(off.auto0[c].real() > 10 * tol);

  plan.chain.cross_noise = 1.0;
  const auto noisy = run_experiment(thermal_source(), plan).pooled_off;
  CHECK(std::abs(noisy.cross[c]) > 10 * tol);
}

TEST_CASE("pulsed photons carry no first-order coherence between pulses") {
  dynamics::SourceParams sp;
  sp.base_rate = 0.3 / sp.rc_time;
  sp.charging_energy = phys::charging_frequency(56.7e-15) * phys::h;
  sp.drive.pulsed = true;
  sp.latch.enabled = true;
  ExperimentPlan plan;
  plan.chain.noise = {0.5, 0.5};
  plan.n_groups = 8;
  plan.pairs_per_group = 1024;
  plan.max_lag = 8;
  const auto r = run_experiment(
                     [sp](std::uint64_t seed, std::size_t n, double dt) {
                       const double warm = 12e-9;
                       const auto rec = dynamics::simulate_source(sp, warm + double(n) * dt, seed, -warm);
                       PhotonInput in;
                       in.kappa = sp.kappa;
                       for (double t : rec.times)
                         if (t > -6e-9) in.times.push_back(t);
                       return ChainInput{in};
                     },
                     plan)
                     .result;
  const std::size_t c = r.tau.size() / 2;
  const std::size_t k6 = c + 6;
  REQUIRE(r.tau[k6] == doctest::Approx(6e-9));
  CHECK(std::abs(r.g1[k6]) < 3 * r.sigma_g1[k6] + 0.02 * std::abs(r.g1[c]));
  CHECK(r.g1[c].real() > 10 * r.sigma_g1[c]);
}

TEST_CASE("crosstalk compensation") {
  auto chain = quiet_chain();
  const std::size_t n = 2 * chain.block_size;
  const ClassicalInput in{white(n, 12)};
  const auto clean = demodulate_envelopes(simulate_chain(in, chain, n, 1), chain);
  chain.crosstalk = 0.05;
  chain.crosstalk_filter = {0.05};
  const auto comp = demodulate_envelopes(simulate_chain(in, chain, n, 1), chain);
  for (std::size_t m = 0; m < comp.ch[0].size(); ++m)
    CHECK(std::abs(comp.ch[0][m] - (1 - 0.05 * 0.05) * clean.ch[0][m]) < 1e-12);
}

TEST_CASE("quantization snaps to the ADC grid") {
  auto chain = quiet_chain();
  chain.quantize = true;
  chain.adc_full_scale = 2.0;
  const auto adc = simulate_chain(ClassicalInput{white(256, 3)}, chain, 256, 1);
  const double lsb = 4.0 / 4096;
  for (double v : adc.ch[0]) CHECK(std::abs(v / lsb - std::round(v / lsb)) < 1e-9);
}

TEST_CASE("invalid chains and records are rejected") {
  auto wide = quiet_chain();
  wide.bandwidth = 3e9;
  CHECK_THROWS_AS(simulate_chain(std::monostate{}, wide, 8, 1), InvalidModel);
  CHECK_THROWS_AS(simulate_chain(PhotonInput{{1e-9}}, quiet_chain(), 64, 1), InvalidModel);
  ChainModel n0;
  CHECK_THROWS_AS(simulate_chain(PhotonInput{{1e-9}}, n0, 64, 1), InvalidModel);
  AdcRecord bad;
  bad.ch[0].resize(256);
  bad.ch[1].resize(255);
  CHECK_THROWS_AS(demodulate_envelopes(bad, quiet_chain()), InvalidModel);
  bad.ch[1].resize(100);
  bad.ch[0].resize(100);
  CHECK_THROWS_AS(demodulate_envelopes(bad, quiet_chain()), InvalidModel);
}
