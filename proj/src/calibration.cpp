#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "jjphoton/constants.hpp"
#include "jjphoton/correlator.hpp"
#include "jjphoton/error.hpp"
#include "jjphoton/fft.hpp"

namespace jjphoton::correlator {

namespace detail {
void demodulate_span(std::span<const double> raw, std::size_t offset, std::size_t n_env,
                     const ChainModel& chain, std::span<cplx> out);
}  // namespace detail

double load_photons(double f, double temperature) {
  if (!(f > 0)) throw InvalidModel("load_photons needs f > 0");
  if (!(temperature >= 0)) throw InvalidModel("temperature must be non-negative");
  if (temperature == 0) return 0.5;
  const double x = phys::h * f / (2.0 * phys::k_B * temperature);
  return 0.5 / std::tanh(x);
}

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Expected periodogram of envelope bin b (segments of L, rectangular) for a
// unit-power input tone at raw baseband frequency nu with random phase. The
// interleaved quadratures leave an image at -nu, so W holds both terms.
double bin_response(const ChainModel& chain, std::size_t L, std::size_t b, double nu) {
  const double w = 2.0 * phys::pi * nu * chain.dt;
  const std::size_t taps = chain.fir.size();
  auto filt = [&](double theta, bool reversed) {
    cplx acc{};
    for (std::size_t j = 0; j < taps; ++j) {
      const double k = (j % 2 == 0 ? 1.0 : -1.0) * chain.fir[reversed ? taps - 1 - j : j];
      acc += k * std::polar(1.0, -theta * static_cast<double>(j));
    }
    return acc;
  };
  const cplx a_plus = 0.5 * (filt(2 * w, false) + std::polar(1.0, w) * filt(2 * w, true));
  const cplx a_minus = 0.5 * (filt(-2 * w, false) - std::polar(1.0, -w) * filt(-2 * w, true));
  const auto sl = static_cast<double>(L);
  auto fejer = [&](double x) {
    const double d = std::sin(0.5 * x);
    if (std::abs(d) < 1e-12) return sl;
    const double n = std::sin(0.5 * sl * x);
    return n * n / (sl * d * d);
  };
  const double theta_b = 2.0 * phys::pi * static_cast<double>(b) / sl;
  return std::norm(a_plus) * fejer(2 * w - theta_b) + std::norm(a_minus) * fejer(-2 * w - theta_b);
}

// Envelope frequency of FFT bin b for segments of length L.
double bin_frequency(std::size_t b, std::size_t L, double env_dt) {
  const auto sb = static_cast<double>(b);
  const auto sl = static_cast<double>(L);
  const double f = (b < (L + 1) / 2 ? sb : sb - sl) / (sl * env_dt);
  return f;
}

// Averaged periodogram of channel `ch` when a matched load at temperature T
// feeds that channel alone.
std::vector<double> load_spectrum(const ChainModel& base, int ch, double temperature,
                                  std::size_t L, std::size_t segments, std::uint64_t seed) {
  ChainModel chain = base;
  chain.split = ch == 0 ? 1.0 : 0.0;
  chain.crosstalk = 0.0;
  chain.crosstalk_filter.clear();

  constexpr std::size_t margin = 8;
  const std::size_t per_chunk = std::max<std::size_t>(1, 4096 / L);
  const std::size_t env_len = per_chunk * L;
  const std::size_t n_raw = 2 * env_len + margin;

  // Thermal occupation above vacuum, shaped on the raw grid.
  std::vector<double> shape(n_raw);
  for (std::size_t b = 0; b < n_raw; ++b) {
    const double nu = bin_frequency(b, n_raw, chain.dt);
    shape[b] = std::sqrt(std::max(0.0, load_photons(chain.f0 + nu, temperature) - 0.5));
  }

  std::vector<double> psd(L, 0.0);
  std::vector<cplx> env(env_len);
  fft::FixedPlan seg_plan(L, true);
  std::normal_distribution<double> nd;
  std::size_t done = 0;
  for (std::uint64_t c = 0; done < segments; ++c) {
    std::mt19937_64 rng(mix(seed ^ mix(2 * c + 1)));
    std::vector<cplx> white(n_raw);
    for (auto& v : white) v = {nd(rng) * std::sqrt(0.5), nd(rng) * std::sqrt(0.5)};
    auto spec = fft::forward(white);
    for (std::size_t b = 0; b < n_raw; ++b) spec[b] *= shape[b] / std::sqrt(static_cast<double>(n_raw));
    auto x = fft::inverse(spec);
    for (auto& v : x) v /= std::sqrt(static_cast<double>(n_raw));

    const auto adc = simulate_chain(ClassicalInput{std::move(x)}, chain, n_raw, mix(seed ^ mix(2 * c)));
    detail::demodulate_span(adc.ch[ch], margin, env_len, chain, env);
    for (std::size_t s = 0; s < per_chunk && done < segments; ++s, ++done) {
      auto in = seg_plan.input();
      std::copy(env.begin() + static_cast<long>(s * L), env.begin() + static_cast<long>((s + 1) * L),
                in.begin());
      const auto out = seg_plan.execute();
      for (std::size_t b = 0; b < L; ++b) psd[b] += std::norm(out[b]);
    }
  }
  for (double& v : psd) v /= static_cast<double>(segments) * static_cast<double>(L);
  return psd;
}

}  // namespace

CalibrationRecord calibrate(const ChainModel& chain, double t_hot, double t_cold, std::size_t bins,
                            std::size_t samples_per_bin, std::uint64_t seed) {
  chain.validate();
  if (!(t_cold >= 0) || !(t_hot > t_cold)) throw InvalidModel("calibration needs T_hot > T_cold >= 0");
  if (bins < 2) throw InvalidModel("calibration needs at least two frequency bins");
  if (samples_per_bin < 2) throw InvalidModel("calibration needs at least two samples per bin");
  if (!chain.vacuum) throw InvalidModel("load calibration assumes the vacuum model");

  const double env_dt = chain.envelope_interval();

  // Bin response to white input (kernel) and the bin-effective load spectra,
  // averaged over the raw band.
  constexpr std::size_t grid = 4096;
  std::vector<double> kernel(bins, 0.0), s_hot(bins, 0.0), s_cold(bins, 0.0);
  for (std::size_t q = 0; q < grid; ++q) {
    const double nu = ((static_cast<double>(q) + 0.5) / grid - 0.5) / chain.dt;
    const double n_hot = load_photons(chain.f0 + nu, t_hot) - 0.5;
    const double n_cold = load_photons(chain.f0 + nu, t_cold) - 0.5;
    for (std::size_t b = 0; b < bins; ++b) {
      const double w = bin_response(chain, bins, b, nu) / grid;
      kernel[b] += w;
      s_hot[b] += w * n_hot;
      s_cold[b] += w * n_cold;
    }
  }
  for (std::size_t b = 0; b < bins; ++b) {
    s_hot[b] = 0.5 + s_hot[b] / kernel[b];
    s_cold[b] = 0.5 + s_cold[b] / kernel[b];
  }

  // Bins in ascending frequency.
  std::vector<std::size_t> order(bins);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return bin_frequency(a, bins, env_dt) < bin_frequency(b, bins, env_dt);
  });

  CalibrationRecord rec;
  rec.t_hot = t_hot;
  rec.t_cold = t_cold;
  for (std::size_t b : order) rec.frequency.push_back(chain.f0 + bin_frequency(b, bins, env_dt));

  double worst = 0.0;
  for (int ch = 0; ch < 2; ++ch) {
    const auto hot = load_spectrum(chain, ch, t_hot, bins, samples_per_bin, mix(seed ^ (4 * ch + 1)));
    const auto cold = load_spectrum(chain, ch, t_cold, bins, samples_per_bin, mix(seed ^ (4 * ch + 2)));
    for (std::size_t i = 0; i < bins; ++i) {
      const std::size_t b = order[i];
      const double g = (hot[b] - cold[b]) / ((s_hot[b] - s_cold[b]) * kernel[b]);
      rec.gain[ch].push_back(g);
      rec.noise[ch].push_back(cold[b] / (g * kernel[b]) - s_cold[b]);
      const double rel = std::hypot(hot[b], cold[b]) / std::abs(hot[b] - cold[b]) /
                         std::sqrt(static_cast<double>(samples_per_bin));
      worst = std::max(worst, rel);
    }
  }
  if (worst > 0.01) {
    std::ostringstream os;
    os << "load temperatures too close for 1% gain precision: expected relative gain error " << worst;
    rec.warnings.push_back(os.str());
  }
  return rec;
}

DriftCorrection drift_compensate(const std::vector<DriftMeasurement>& series,
                                 double reference_noise_power, double window) {
  if (!(reference_noise_power > 0)) throw InvalidModel("reference noise power must be positive");
  if (!(window >= 0)) throw InvalidModel("phase-fit window must be non-negative");
  DriftCorrection out;
  for (const auto& m : series) {
    if (!(m.off_power > 0) || !std::isfinite(m.off_power))
      throw InvalidModel("drift compensation needs an off-state noise power for every measurement");
    if (m.tau.size() != m.g1.size() || m.tau.empty())
      throw InvalidModel("measurement tau and G1 grids differ");

    const double gain = m.off_power / reference_noise_power;

    // Phase delta + 2 pi df tau, unwrapped from the point nearest tau = 0.
    std::size_t centre = 0;
    for (std::size_t i = 1; i < m.tau.size(); ++i)
      if (std::abs(m.tau[i]) < std::abs(m.tau[centre])) centre = i;
    const double phi0 = std::arg(m.g1[centre]);
    double sw = 0, st = 0, sp = 0, stt = 0, stp = 0;
    for (std::size_t i = 0; i < m.tau.size(); ++i) {
      if (std::abs(m.tau[i]) > window) continue;
      const double w = std::norm(m.g1[i]);
      const double p = phi0 + std::arg(m.g1[i] * std::polar(1.0, -phi0));
      sw += w;
      st += w * m.tau[i];
      sp += w * p;
      stt += w * m.tau[i] * m.tau[i];
      stp += w * m.tau[i] * p;
    }
    if (!(sw > 0)) throw NumericalError("no G1 signal inside the phase-fit window");
    const double det = sw * stt - st * st;
    double slope = 0.0, delta = sp / sw;
    if (det > 1e-12 * sw * stt && det > 0) {
      slope = (sw * stp - st * sp) / det;
      delta = (sp - slope * st) / sw;
    }

    DriftMeasurement c = m;
    for (std::size_t i = 0; i < c.g1.size(); ++i)
      c.g1[i] = m.g1[i] / gain * std::polar(1.0, -(delta + slope * m.tau[i]));
    out.corrected.push_back(std::move(c));
    out.gain.push_back(gain);
    out.phase.push_back(delta);
    out.detuning.push_back(slope / (2.0 * phys::pi));
  }
  return out;
}

}  // namespace jjphoton::correlator
