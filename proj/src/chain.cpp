#include <algorithm>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <cmath>
#include <random>
#include <sstream>

#include "jjphoton/constants.hpp"
#include "jjphoton/correlator.hpp"
#include "jjphoton/error.hpp"

namespace jjphoton::correlator {

void ChainModel::validate() const {
  for (int i = 0; i < 2; ++i) {
    if (!(gain[i] > 0)) throw InvalidModel("chain gains must be positive");
    if (!(noise[i] >= 0)) throw InvalidModel("noise photon numbers must be non-negative");
  }
  if (!(cross_noise >= 0)) throw InvalidModel("cross_noise must be non-negative");
  if (!(dt > 0)) throw InvalidModel("sampling interval must be positive");
  if (!(split >= 0 && split <= 1))
    throw InvalidModel("splitter ratio must lie in [0, 1]");
  if (block_size < 2) throw InvalidModel("block size must be at least 2");
  if (crosstalk_filter.size() > 16) throw InvalidModel("crosstalk filter has at most 16 taps");
  if (quantize && (adc_bits < 2 || adc_bits > 24 || !(adc_full_scale > 0)))
    throw InvalidModel("invalid ADC quantization settings");

  const double fs = 1.0 / dt, f_if = intermediate_frequency();
  const double lo = f_if - 0.5 * bandwidth, hi = f_if + 0.5 * bandwidth;
  const double tol = 1e-9 * fs;
  if (!(bandwidth > 0) || lo < 0.5 * fs - tol || hi > fs + tol) {
    std::ostringstream os;
    os << "input band " << lo / 1e9 << "-" << hi / 1e9 << " GHz after down-conversion leaves the "
       << "second Nyquist band " << 0.5 * fs / 1e9 << "-" << fs / 1e9 << " GHz";
    throw InvalidModel(os.str());
  }
}

double ChainModel::channel_noise(int i) const { return noise[i] + (vacuum ? 0.5 : 0.0); }

double ChainModel::split_amplitude(int i) const {
  return std::sqrt(i == 0 ? split : 1.0 - split);
}

namespace {

using Normal = boost::random::normal_distribution<double>;

// Circular complex Gaussian with E|z|^2 = variance.
cplx complex_normal(std::mt19937_64& rng, Normal& nd, double variance) {
  const double s = std::sqrt(0.5 * variance);
  const double re = nd(rng);
  return {s * re, s * nd(rng)};
}

// Box-mode projection of sqrt(kappa) exp(-kappa (t - te) / 2) on samples
// [n dt, (n+1) dt). Returns the first index and the coefficients.
std::size_t packet_modes(double te, double kappa, double dt, std::size_t n_samples,
                         std::vector<double>& psi) {
  psi.clear();
  const double t_last = dt * static_cast<double>(n_samples);
  if (te >= t_last) return n_samples;
  const auto first = static_cast<std::size_t>(std::max(0.0, std::floor(te / dt)));
  const double c = 2.0 / std::sqrt(kappa * dt);
  for (std::size_t n = first; n < n_samples; ++n) {
    const double a = std::max(te, dt * static_cast<double>(n));
    const double b = dt * static_cast<double>(n + 1);
    const double ea = std::exp(-0.5 * kappa * (a - te));
    psi.push_back(c * (ea - std::exp(-0.5 * kappa * (b - te))));
    if (ea < 1e-9) break;
  }
  return first;
}

}  // namespace

AdcRecord simulate_chain(const ChainInput& input, const ChainModel& chain, std::size_t n_samples,
                         std::uint64_t seed) {
  chain.validate();
  const auto* photons = std::get_if<PhotonInput>(&input);
  const auto* classical = std::get_if<ClassicalInput>(&input);
  if (classical && classical->samples.size() < n_samples)
    throw InvalidModel("classical input shorter than the requested record");
  if (photons) {
    if (!chain.vacuum)
      throw InvalidModel("single-photon input needs the vacuum model (Q-function rendering)");
    if (chain.noise[0] < 0.5 || chain.noise[1] < 0.5)
      throw InvalidModel("single-photon input needs N >= 0.5 per channel (quantum limit)");
    if (!(photons->kappa > 0)) throw InvalidModel("photon decay rate must be positive");
  }

  std::mt19937_64 rng(seed);
  Normal nd;
  const double var0 = chain.channel_noise(0), var1 = chain.channel_noise(1);
  const double s0 = chain.split_amplitude(0), s1 = chain.split_amplitude(1);

  std::array<std::vector<cplx>, 2> y{std::vector<cplx>(n_samples), std::vector<cplx>(n_samples)};
  for (std::size_t n = 0; n < n_samples; ++n) {
    cplx a = complex_normal(rng, nd, var0);
    cplx b = complex_normal(rng, nd, var1);
    if (chain.cross_noise > 0) {
      const cplx c = complex_normal(rng, nd, chain.cross_noise);
      a += c;
      b += c;
    }
    if (classical) {
      a += s0 * classical->samples[n];
      b += s1 * classical->samples[n];
    }
    y[0][n] = a;
    y[1][n] = b;
  }

  if (photons) {
    // Each packet mode psi is replaced by a Q-function sample of the photon
    // state, mixed with the splitter's idle vacuum d and the amplifier noise.
    boost::random::uniform_real_distribution<double> unit(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);
    const double c0 = s1, c1 = -s0;
    std::vector<double> psi;
    for (double te : photons->times) {
      const std::size_t first = packet_modes(te, photons->kappa, chain.dt, n_samples, psi);
      if (psi.empty()) continue;
      double eta = 0.0;
      for (double v : psi) eta += v * v;
      if (!(eta > 0)) continue;
      const double norm = 1.0 / std::sqrt(eta);
      for (double& v : psi) v *= norm;

      cplx alpha;
      if (unit(rng) < eta) {
        const double r2 = expo(rng) + expo(rng);
        alpha = std::polar(std::sqrt(r2), 2.0 * phys::pi * unit(rng));
      } else {
        alpha = complex_normal(rng, nd, 1.0);
      }
      const cplx d = complex_normal(rng, nd, 1.0);
      const cplx common = chain.cross_noise > 0 ? complex_normal(rng, nd, chain.cross_noise) : cplx{};
      const cplx z0 = s0 * alpha + c0 * d + complex_normal(rng, nd, chain.noise[0] - 0.5) + common;
      const cplx z1 = s1 * alpha + c1 * d + complex_normal(rng, nd, chain.noise[1] - 0.5) + common;

      cplx p0{}, p1{};
      for (std::size_t k = 0; k < psi.size(); ++k) {
        p0 += psi[k] * y[0][first + k];
        p1 += psi[k] * y[1][first + k];
      }
      for (std::size_t k = 0; k < psi.size(); ++k) {
        y[0][first + k] += (z0 - p0) * psi[k];
        y[1][first + k] += (z1 - p1) * psi[k];
      }
    }
  }

  AdcRecord rec;
  rec.dt = chain.dt;
  const double w = 2.0 * phys::pi * chain.intermediate_frequency() * chain.dt;
  for (int i = 0; i < 2; ++i) {
    auto& v = rec.ch[i];
    v.resize(n_samples);
    const double amp = std::sqrt(chain.gain[i]);
    for (std::size_t n = 0; n < n_samples; ++n) {
      const double ph = std::fmod(w * static_cast<double>(n), 2.0 * phys::pi);
      v[n] = amp * (y[i][n] * std::polar(1.0, ph)).real();
    }
  }
  if (chain.crosstalk != 0) {
    for (std::size_t n = 0; n < n_samples; ++n) {
      const double a = rec.ch[0][n], b = rec.ch[1][n];
      rec.ch[0][n] = a + chain.crosstalk * b;
      rec.ch[1][n] = b + chain.crosstalk * a;
    }
  }
  if (chain.quantize) {
    const double lsb = 2.0 * chain.adc_full_scale / std::ldexp(1.0, chain.adc_bits);
    for (auto& v : rec.ch)
      for (double& x : v)
        x = std::clamp(std::round(x / lsb) * lsb, -chain.adc_full_scale,
                       chain.adc_full_scale - lsb);
  }
  return rec;
}

cplx fir_response(const ChainModel& chain, double f) {
  // Lowpass form k_j (-1)^j of the kernel, at envelope sampling 2 dt.
  cplx acc{};
  for (std::size_t j = 0; j < chain.fir.size(); ++j) {
    const double kj = (j % 2 == 0 ? 1.0 : -1.0) * chain.fir[j];
    acc += kj * std::polar(1.0, -2.0 * phys::pi * f * chain.envelope_interval() *
                                    static_cast<double>(j));
  }
  return acc;
}

namespace detail {

// Demodulates raw[offset..] into n_env envelope samples, using the preceding
// raw samples (if any) as FIR history. `offset` must be a multiple of 4.
void demodulate_span(std::span<const double> raw, std::size_t offset, std::size_t n_env,
                     const ChainModel& chain, std::span<cplx> out) {
  const auto& k = chain.fir;
  const std::size_t taps = k.size();
  const std::size_t m0 = offset / 2;
  for (std::size_t m = 0; m < n_env; ++m) {
    const std::size_t mm = m0 + m;
    double re = 0.0, im = 0.0;
    for (std::size_t j = 0; j < taps && j <= mm; ++j) {
      re += k[j] * raw[2 * (mm - j)];
      im += k[taps - 1 - j] * raw[2 * (mm - j) + 1];
    }
    const double sign = (mm % 2 == 0) ? 1.0 : -1.0;
    out[m] = {sign * re, sign * im};
  }
}

// Subtracts the crosstalk compensation filter applied to the other channel.
void compensate_crosstalk(std::array<std::vector<double>, 2>& ch, const std::vector<double>& f) {
  if (f.empty()) return;
  const auto a = ch[0], b = ch[1];
  for (std::size_t n = 0; n < a.size(); ++n) {
    double da = 0.0, db = 0.0;
    for (std::size_t j = 0; j < f.size() && j <= n; ++j) {
      da += f[j] * b[n - j];
      db += f[j] * a[n - j];
    }
    ch[0][n] -= da;
    ch[1][n] -= db;
  }
}

}  // namespace detail

EnvelopeRecord demodulate_envelopes(const AdcRecord& adc, const ChainModel& chain,
                                    const std::vector<bool>& on) {
  chain.validate();
  if (adc.ch[0].size() != adc.ch[1].size())
    throw InvalidModel("ADC channels have different lengths");
  const std::size_t n_raw = adc.ch[0].size();
  const std::size_t block_raw = 2 * chain.block_size;
  if (n_raw == 0 || n_raw % block_raw != 0)
    throw InvalidModel("ADC record length must be a positive multiple of 2N");
  const double canonical = 3.0 / (4.0 * chain.dt);
  if (std::abs(chain.intermediate_frequency() - canonical) > 1e-9 * canonical)
    throw InvalidModel("demodulation needs f0 - f_LO = 3 / (4 dt)");

  EnvelopeRecord env;
  env.dt = chain.envelope_interval();
  env.block_size = chain.block_size;
  const std::size_t n_env = n_raw / 2;
  auto ch = adc.ch;
  detail::compensate_crosstalk(ch, chain.crosstalk_filter);
  for (int i = 0; i < 2; ++i) {
    env.ch[i].resize(n_env);
    detail::demodulate_span(ch[i], 0, n_env, chain, env.ch[i]);
  }
  const std::size_t nb = n_env / chain.block_size;
  if (!on.empty() && on.size() != nb) throw InvalidModel("on/off tags do not match block count");
  env.on = on.empty() ? std::vector<bool>(nb, true) : on;
  return env;
}

}  // namespace jjphoton::correlator
