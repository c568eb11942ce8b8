#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "jjphoton/correlator.hpp"
#include "jjphoton/error.hpp"
#include "jjphoton/fft.hpp"
#include "parallel.hpp"

namespace jjphoton::correlator {

namespace detail {
void demodulate_span(std::span<const double> raw, std::size_t offset, std::size_t n_env,
                     const ChainModel& chain, std::span<cplx> out);
void compensate_crosstalk(std::array<std::vector<double>, 2>& ch, const std::vector<double>& f);
}  // namespace detail

namespace {

// One forward plan per thread and size; plans are not shareable.
fft::FixedPlan& thread_plan(std::size_t n) {
  thread_local std::vector<std::unique_ptr<fft::FixedPlan>> plans;
  for (auto& p : plans)
    if (p->size() == n) return *p;
  plans.push_back(std::make_unique<fft::FixedPlan>(n, true));
  return *plans.back();
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

Accumulator::Accumulator(std::size_t block_size)
    : n_(block_size),
      cross_(2 * block_size),
      auto0_(2 * block_size),
      auto1_(2 * block_size),
      product_(2 * block_size) {}

void Accumulator::add_block(std::span<const cplx> s0, std::span<const cplx> s1) {
  if (s0.size() != n_ || s1.size() != n_) throw InvalidModel("block length mismatch");
  const std::size_t m = 2 * n_;
  auto& plan = thread_plan(m);
  auto in = plan.input();

  std::fill(in.begin(), in.end(), cplx{});
  std::copy(s0.begin(), s0.end(), in.begin());
  const auto f0_view = plan.execute();
  std::vector<cplx> f0(f0_view.begin(), f0_view.end());

  std::copy(s1.begin(), s1.end(), in.begin());
  const auto f1_view = plan.execute();
  std::vector<cplx> f1(f1_view.begin(), f1_view.end());

  for (std::size_t t = 0; t < n_; ++t) in[t] = std::conj(s0[t]) * s1[t];
  const auto fp = plan.execute();

  for (std::size_t k = 0; k < m; ++k) {
    cross_[k] += std::conj(f0[k]) * f1[k];
    auto0_[k] += std::norm(f0[k]);
    auto1_[k] += std::norm(f1[k]);
    product_[k] += std::norm(fp[k]);
  }
  ++n_blocks_;
}

void Accumulator::merge(const Accumulator& other) {
  if (other.n_ != n_) throw InvalidModel("accumulator block sizes differ");
  for (std::size_t k = 0; k < 2 * n_; ++k) {
    cross_[k] += other.cross_[k];
    auto0_[k] += other.auto0_[k];
    auto1_[k] += other.auto1_[k];
    product_[k] += other.product_[k];
  }
  n_blocks_ += other.n_blocks_;
}

RawCorrelators Accumulator::finalize(double dt) const {
  RawCorrelators r;
  r.n_blocks = n_blocks_;
  const std::size_t m = 2 * n_;
  const std::size_t lags = 2 * n_ - 1;
  r.tau.resize(lags);
  for (std::size_t i = 0; i < lags; ++i)
    r.tau[i] = dt * (static_cast<double>(i) - static_cast<double>(n_ - 1));
  if (n_blocks_ == 0) {
    r.cross = r.auto0 = r.auto1 = r.product = std::vector<cplx>(lags);
    return r;
  }
  auto lagged = [&](const std::vector<cplx>& spec) {
    const auto c = fft::inverse(spec);
    std::vector<cplx> out(lags);
    for (std::size_t i = 0; i < lags; ++i) {
      const auto lag = static_cast<long>(i) - static_cast<long>(n_ - 1);
      const std::size_t idx = lag >= 0 ? static_cast<std::size_t>(lag)
                                       : m - static_cast<std::size_t>(-lag);
      const double pairs = static_cast<double>(n_) - std::abs(static_cast<double>(lag));
      out[i] = c[idx] / (static_cast<double>(m) * static_cast<double>(n_blocks_) * pairs);
    }
    return out;
  };
  r.cross = lagged(cross_);
  r.auto0 = lagged(auto0_);
  r.auto1 = lagged(auto1_);
  r.product = lagged(product_);
  return r;
}

OnOff correlate(const EnvelopeRecord& env) {
  if (env.ch[0].size() != env.ch[1].size()) throw InvalidModel("envelope channels differ in length");
  const std::size_t n = env.block_size, nb = env.n_blocks();
  if (nb < 1) throw InvalidModel("envelope record holds no complete block");
  Accumulator on(n), off(n);
  for (std::size_t b = 0; b < nb; ++b) {
    std::span<const cplx> s0(env.ch[0].data() + b * n, n), s1(env.ch[1].data() + b * n, n);
    const bool is_on = b < env.on.size() ? env.on[b] : true;
    (is_on ? on : off).add_block(s0, s1);
  }
  return {on.finalize(env.dt), off.finalize(env.dt)};
}

CrossPair gamma1_cross(const EnvelopeRecord& env) {
  auto c = correlate(env);
  return {c.on.tau, c.on.cross, c.off.cross};
}

CrossPair gamma2_cross(const EnvelopeRecord& env) {
  auto c = correlate(env);
  return {c.on.tau, c.on.product, c.off.product};
}

CorrelationResult assemble_g1_g2(const RawCorrelators& on, const RawCorrelators& off,
                                 std::array<double, 2> gains, double split, double precision) {
  const std::size_t m = on.tau.size();
  if (off.tau.size() != m || on.cross.size() != m || off.cross.size() != m)
    throw InvalidModel("on and off correlators have different lag grids");
  if (!(gains[0] > 0 && gains[1] > 0)) throw InvalidModel("gains must be positive");
  if (on.n_blocks == 0 || off.n_blocks == 0)
    throw InvalidModel("assembly needs at least one on and one off block");
  const std::size_t c = m / 2;  // zero lag
  const double amp = std::sqrt(split * (1.0 - split) * gains[0] * gains[1]);

  CorrelationResult r;
  r.tau = on.tau;
  r.gamma1_cross = on.cross;
  r.gamma2_cross = on.product;
  r.n_avg = on.n_blocks;
  r.g1.resize(m);
  r.G2.resize(m);
  r.g2.resize(m);

  std::vector<cplx> signal(m);
  for (std::size_t i = 0; i < m; ++i) signal[i] = on.cross[i] - off.cross[i];
  const cplx k0 = off.cross[c];
  const double c0 = signal[c].real();
  for (std::size_t i = 0; i < m; ++i) {
    const cplx a0 = on.auto0[i] - off.auto0[i];
    const cplx a1 = on.auto1[i] - off.auto1[i];
    const cplx noise_terms = std::conj(off.auto0[i]) * a1 + std::conj(a0) * off.auto1[i] +
                             signal[c] * (k0 + std::conj(k0));
    const cplx g2_raw = on.product[i] - off.product[i] - noise_terms;
    r.g1[i] = signal[i] / amp;
    r.G2[i] = g2_raw / (amp * amp);
    r.g2[i] = g2_raw.real() / (c0 * c0);
  }
  if (!(c0 > 0)) r.warnings.push_back("no first-order signal: G1(0) <= 0, g2 undefined");

  if (precision > 0 && c0 > 0) {
    // Standard error of the off-state product term, which dominates the
    // noise subtraction, relative to G1(0)^2.
    const double lags = static_cast<double>(m / 2 + 1);
    const double err = std::abs(off.auto0[c]) * std::abs(off.auto1[c]) /
                       std::sqrt(static_cast<double>(off.n_blocks) * lags) / (c0 * c0);
    if (err > precision)
      r.warnings.push_back("off statistics insufficient: expected g2 error " + std::to_string(err) +
                           " exceeds requested precision");
  }
  return r;
}

BlockStats block_statistics(const std::vector<std::vector<double>>& blocks) {
  const std::size_t nb = blocks.size();
  if (nb < 2) throw InvalidModel("block statistics need n_b >= 2");
  const std::size_t m = blocks[0].size();
  for (const auto& b : blocks)
    if (b.size() != m) throw InvalidModel("blocks differ in length");
  BlockStats s;
  s.mean.assign(m, 0.0);
  s.sigma.assign(m, 0.0);
  for (const auto& b : blocks)
    for (std::size_t i = 0; i < m; ++i) s.mean[i] += b[i];
  for (double& v : s.mean) v /= static_cast<double>(nb);
  for (const auto& b : blocks)
    for (std::size_t i = 0; i < m; ++i) s.sigma[i] += (b[i] - s.mean[i]) * (b[i] - s.mean[i]);
  for (double& v : s.sigma) v = std::sqrt(v / static_cast<double>(nb)) / std::sqrt(static_cast<double>(nb - 1));
  return s;
}

BlockStats g2_group_statistics(const std::vector<CorrelationResult>& groups) {
  if (groups.size() < 2) throw InvalidModel("block statistics need n_b >= 2");
  // g2 = G2 / G1(0)^2 with both factors estimated per group. The ratio of two
  // noisy group estimates is heavy tailed, so each group enters linearized
  // about the group means; their average is exactly mean(G2) / mean(G1(0))^2.
  const auto nb = static_cast<double>(groups.size());
  const std::size_t m = groups.front().tau.size(), c = m / 2;
  std::vector<double> g2_mean(m, 0.0);
  double g1_mean = 0.0;
  for (const auto& r : groups) {
    if (r.tau.size() != m) throw InvalidModel("groups have different lag grids");
    for (std::size_t i = 0; i < m; ++i) g2_mean[i] += r.G2[i].real();
    g1_mean += r.g1[c].real();
  }
  for (double& v : g2_mean) v /= nb;
  g1_mean /= nb;
  std::vector<std::vector<double>> lin;
  for (const auto& r : groups) {
    std::vector<double> v(m);
    for (std::size_t i = 0; i < m; ++i)
      v[i] = r.G2[i].real() / (g1_mean * g1_mean) -
             2.0 * g2_mean[i] * (r.g1[c].real() - g1_mean) / (g1_mean * g1_mean * g1_mean);
    lin.push_back(std::move(v));
  }
  return block_statistics(lin);
}

namespace {

// Restricts a result to |tau| <= max_lag samples.
CorrelationResult trim(const CorrelationResult& r, std::size_t max_lag) {
  const std::size_t c = r.tau.size() / 2;
  const std::size_t k = std::min(max_lag, c);
  auto cut = [&](const auto& v) {
    using V = std::decay_t<decltype(v)>;
    if (v.empty()) return V{};
    return V(v.begin() + static_cast<long>(c - k), v.begin() + static_cast<long>(c + k + 1));
  };
  CorrelationResult t = r;
  t.tau = cut(r.tau);
  t.gamma1_cross = cut(r.gamma1_cross);
  t.gamma2_cross = cut(r.gamma2_cross);
  t.g1 = cut(r.g1);
  t.G2 = cut(r.G2);
  t.g2 = cut(r.g2);
  t.sigma_g2 = cut(r.sigma_g2);
  t.sigma_g1 = cut(r.sigma_g1);
  return t;
}

constexpr std::size_t batch_pairs = 16;
constexpr std::size_t fir_margin = 8;  // raw samples of FIR history per block

}  // namespace

Experiment run_experiment(const SourceFactory& source, const ExperimentPlan& plan) {
  const auto& chain = plan.chain;
  chain.validate();
  const double canonical = 3.0 / (4.0 * chain.dt);
  if (std::abs(chain.intermediate_frequency() - canonical) > 1e-9 * canonical)
    throw InvalidModel("demodulation needs f0 - f_LO = 3 / (4 dt)");
  if (plan.n_groups < 2) throw InvalidModel("experiment needs at least two groups");
  if (plan.pairs_per_group < 1) throw InvalidModel("experiment needs at least one block pair per group");

  const std::size_t n = chain.block_size;
  const std::size_t n_raw = 2 * n + fir_margin;
  const double env_dt = chain.envelope_interval();
  const std::size_t batches = (plan.pairs_per_group + batch_pairs - 1) / batch_pairs;

  auto run_block = [&](std::uint64_t index, bool on, Accumulator& acc) {
    const std::uint64_t chain_seed = splitmix64(plan.seed ^ splitmix64(2 * index));
    ChainInput input;
    if (on) input = source(splitmix64(plan.seed ^ splitmix64(2 * index + 1)), n_raw, chain.dt);
    auto adc = simulate_chain(input, chain, n_raw, chain_seed);
    detail::compensate_crosstalk(adc.ch, chain.crosstalk_filter);
    std::array<std::vector<cplx>, 2> env{std::vector<cplx>(n), std::vector<cplx>(n)};
    for (int i = 0; i < 2; ++i) detail::demodulate_span(adc.ch[i], fir_margin, n, chain, env[i]);
    acc.add_block(env[0], env[1]);
  };

  Experiment ex;
  Accumulator pooled_on(n), pooled_off(n);
  std::vector<std::vector<double>> g1_blocks;
  for (std::size_t g = 0; g < plan.n_groups; ++g) {
    std::vector<Accumulator> on(batches, Accumulator(n)), off(batches, Accumulator(n));
    jjphoton::detail::parallel_for(batches, plan.threads, [&](std::size_t b) {
      const std::size_t lo = b * batch_pairs;
      const std::size_t hi = std::min(plan.pairs_per_group, lo + batch_pairs);
      for (std::size_t p = lo; p < hi; ++p) {
        const std::uint64_t pair = g * plan.pairs_per_group + p;
        run_block(2 * pair, true, on[b]);
        run_block(2 * pair + 1, false, off[b]);
      }
    });
    Accumulator group_on(n), group_off(n);
    for (std::size_t b = 0; b < batches; ++b) {
      group_on.merge(on[b]);
      group_off.merge(off[b]);
    }
    pooled_on.merge(group_on);
    pooled_off.merge(group_off);
    auto r = assemble_g1_g2(group_on.finalize(env_dt), group_off.finalize(env_dt), chain.gain,
                            chain.split);
    r = trim(r, plan.max_lag);
    std::vector<double> g1re(r.g1.size());
    for (std::size_t i = 0; i < g1re.size(); ++i) g1re[i] = r.g1[i].real();
    g1_blocks.push_back(std::move(g1re));
    ex.groups.push_back(std::move(r));
  }

  ex.pooled_on = pooled_on.finalize(env_dt);
  ex.pooled_off = pooled_off.finalize(env_dt);
  auto pooled = trim(assemble_g1_g2(ex.pooled_on, ex.pooled_off, chain.gain, chain.split),
                     plan.max_lag);
  const auto s2 = g2_group_statistics(ex.groups);
  const auto s1 = block_statistics(g1_blocks);
  ex.result = pooled;
  ex.result.g2 = s2.mean;
  ex.result.sigma_g2 = s2.sigma;
  ex.result.sigma_g1 = s1.sigma;
  ex.result.n_b = plan.n_groups;
  ex.result.n_avg = plan.pairs_per_group;
  return ex;
}

}  // namespace jjphoton::correlator
