#include "jjphoton/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "jjphoton/constants.hpp"
#include "jjphoton/error.hpp"
#include "jjphoton/fft.hpp"
#include "jjphoton/io.hpp"

namespace jjphoton::dynamics {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

double gaussian_window(double offset, double width) {
  const double x = offset / width;
  return std::exp(-0.5 * x * x);
}

}  // namespace

double DriveParams::ic_ratio(double t) const {
  double flux = flux_dc;
  if (pulsed) {
    const double n = std::round((t - t_first) / period);
    const double a = 4.0 * std::log(2.0) / (fwhm * fwhm);
    double g = 0.0;
    for (int k = -2; k <= 2; ++k) {
      const double dt = t - (t_first + (n + k) * period);
      g += std::exp(-a * dt * dt);
    }
    flux += flux_pulse * g;
  }
  return std::abs(std::cos(phys::pi * flux));
}

double DriveParams::next_pulse(double t) const {
  if (!pulsed) return inf;
  double c = t_first + std::ceil((t - t_first) / period) * period;
  while (c <= t) c += period;
  return c;
}

void SourceParams::validate() const {
  if (!(rc_time > 0)) throw InvalidModel("rc_time must be positive");
  if (!(kappa > 0)) throw InvalidModel("kappa must be positive");
  if (!(base_rate >= 0) || !std::isfinite(base_rate))
    throw InvalidModel("base_rate must be finite and non-negative");
  if (!(charging_energy >= 0)) throw InvalidModel("charging_energy must be non-negative");
  if (!(t_eff >= 0)) throw InvalidModel("t_eff must be non-negative");
  if (drive.pulsed && !(drive.period > 0 && drive.fwhm > 0))
    throw InvalidModel("pulsed drive needs positive period and fwhm");
}

double SourceParams::window_width() const {
  return std::max(phys::k_B * t_eff / phys::h, kappa / (2.0 * phys::pi));
}

double SourceParams::charge_shift() const { return 2.0 * charging_energy / phys::h; }

double SourceParams::rate(double charge, double t) const {
  const double ic = drive.ic_ratio(t);
  return base_rate * ic * ic * gaussian_window(detuning - charge_shift() * charge, window_width());
}

double EventRecord::charge_at(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0.0;
  const auto i = static_cast<std::size_t>(it - times.begin()) - 1;
  return charge_after[i] * std::exp(-(t - times[i]) / rc_time);
}

bool EventRecord::dark_at(double t) const {
  bool dark = false;
  for (const auto& tr : latch) {
    if (tr.time > t) break;
    dark = tr.dark;
  }
  return dark;
}

double EventRecord::rate() const {
  return duration > 0 ? static_cast<double>(times.size()) / duration : 0.0;
}

EventRecord simulate_source(const SourceParams& p, double duration, std::uint64_t seed,
                            double t_start) {
  p.validate();
  EventRecord rec;
  rec.t_start = t_start;
  rec.duration = duration;
  rec.seed = seed;
  rec.rc_time = p.rc_time;
  if (!(p.base_rate > 0) || !(duration > 0)) return rec;

  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(p.base_rate);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double t_end = t_start + duration;
  const bool resets = p.latch.enabled && p.latch.exit_on_frustration && p.drive.pulsed;
  double next_reset = resets ? p.drive.next_pulse(t_start) : inf;
  double t = t_start, q = 0.0, t_q = t_start;
  bool dark = false;

  while (true) {
    if (dark) {
      // Candidates are memoryless, so the dark stretch can be skipped outright.
      if (!(next_reset < t_end)) break;
      t = next_reset;
      dark = false;
      rec.latch.push_back({t, false});
      next_reset = p.drive.next_pulse(t);
    }
    t += gap(rng);
    if (t >= t_end) break;
    while (next_reset <= t) next_reset = p.drive.next_pulse(next_reset);

    const double charge = q * std::exp(-(t - t_q) / p.rc_time);
    if (unit(rng) * p.base_rate >= p.rate(charge, t)) continue;

    q = charge + 1.0;
    t_q = t;
    rec.times.push_back(t);
    rec.charge_after.push_back(q);
    if (p.latch.enabled && p.drive.ic_ratio(t) >= p.latch.enter_threshold) {
      dark = true;
      rec.latch.push_back({t, true});
    }
  }
  return rec;
}

double RenewalOracle::operator()(double t) const {
  const double x = std::abs(t) / dt;
  if (x >= static_cast<double>(g2.size() - 1)) return 1.0;
  const auto i = static_cast<std::size_t>(x);
  const double w = x - static_cast<double>(i);
  return (1.0 - w) * g2[i] + w * g2[i + 1];
}

namespace {

// Solves r = b + b * r for a mass vector b on [0, n), i.e. the sum of all
// self-convolutions of b.
std::vector<double> renewal_series(const std::vector<double>& b) {
  const std::size_t n = b.size();
  std::vector<double> r = b;
  const double scale = *std::max_element(b.begin(), b.end());
  for (int iter = 0; iter < 100000; ++iter) {
    const auto conv = fft::convolve(b, r);
    double change = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double next = b[k] + conv[k];
      change = std::max(change, std::abs(next - r[k]));
      r[k] = next;
    }
    if (change <= 1e-14 * std::max(scale, 1e-300)) break;
  }
  return r;
}

// Adds mass w at position x (in bins) split linearly between neighbours.
void deposit(std::vector<double>& v, double x, double w) {
  const auto i = static_cast<std::size_t>(x);
  if (i >= v.size()) return;
  const double f = x - static_cast<double>(i);
  v[i] += (1.0 - f) * w;
  if (i + 1 < v.size()) v[i + 1] += f * w;
}

}  // namespace

RenewalOracle renewal_g2_oracle(const std::function<double(double)>& hazard, double horizon,
                                double dt, double charge_rc) {
  if (!(dt > 0) || !(horizon > 2 * dt)) throw InvalidModel("oracle needs 0 < 2 dt < horizon");
  if (charge_rc < 0) throw InvalidModel("charge_rc must be non-negative");
  const auto n = static_cast<std::size_t>(std::ceil(horizon / dt)) + 1;

  // Cumulative hazard at multiples of dt/2, Simpson on dt/4 substeps.
  const double q = 0.25 * dt;
  auto eval = [&](double t) {
    const double v = hazard(t);
    if (!(v >= 0) || !std::isfinite(v)) throw InvalidModel("hazard must be finite and non-negative");
    return v;
  };
  std::vector<double> surv(2 * n + 1);  // S at k dt/2
  double cum = 0.0, mean = 0.0, prev = eval(0.0);
  surv[0] = 1.0;
  for (std::size_t k = 1; k < surv.size(); ++k) {
    const double t = 2.0 * q * static_cast<double>(k);
    const double mid = eval(t - q), end = eval(t);
    const double s0 = std::exp(-cum);
    const double step = 2.0 * q * (prev + 4.0 * mid + end) / 6.0;
    const double s_mid = s0 * std::exp(-0.5 * step);
    cum += step;
    surv[k] = std::exp(-cum);
    mean += 2.0 * q * (s0 + 4.0 * s_mid + surv[k]) / 6.0;
    prev = end;
  }
  if (prev > 0) {
    mean += surv.back() / prev;
  } else if (surv.back() > 1e-12) {
    throw NumericalError("inter-event distribution is not normalizable within the horizon");
  }

  // Interval mass per bin [(j - 1/2) dt, (j + 1/2) dt), bin 0 is half width.
  std::vector<double> mass(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t lo = j == 0 ? 0 : 2 * j - 1;
    mass[j] = surv[lo] - surv[2 * j + 1];
  }

  std::vector<double> events;
  if (charge_rc == 0) {
    events = renewal_series(mass);
  } else {
    // Charge left at an event delays the next recovery by rc ln(1 + q_res),
    // with q_res = exp(-tau1 / rc) fixed by the previous base interval tau1.
    auto delay = [&](double t) { return charge_rc * std::log1p(std::exp(-t / charge_rc)); };
    std::vector<double> lead(n), step(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double t = dt * static_cast<double>(j);
      deposit(lead, delay(t) / dt, mass[j]);
      deposit(step, (t + delay(t)) / dt, mass[j]);
      mean += mass[j] * delay(t);
    }
    auto first = fft::convolve(lead, mass);
    first.resize(n);
    const auto later = fft::convolve(first, renewal_series(step));
    events.resize(n);
    for (std::size_t k = 0; k < n; ++k) events[k] = first[k] + later[k];
  }

  RenewalOracle out;
  out.dt = dt;
  out.mean_interval = mean;
  out.steady_rate = 1.0 / mean;
  out.tau.resize(n);
  out.g2.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double width = k == 0 ? 0.5 * dt : dt;
    out.tau[k] = dt * static_cast<double>(k);
    out.g2[k] = events[k] / width * mean;
  }
  return out;
}

std::function<double(double)> after_event_hazard(const SourceParams& p) {
  p.validate();
  const double ic = std::abs(std::cos(phys::pi * p.drive.flux_dc));
  const double peak = p.base_rate * ic * ic;
  const double shift = p.charge_shift(), width = p.window_width();
  const double detuning = p.detuning, rc = p.rc_time;
  return [=](double t) {
    return peak * gaussian_window(detuning - shift * std::exp(-t / rc), width);
  };
}

std::vector<cplx> events_to_envelope(const EventRecord& rec, double kappa, double dt,
                                     double amplitude, std::uint64_t seed) {
  if (!(kappa > 0) || !(dt > 0) || !(dt < 1.0 / kappa))
    throw InvalidModel("events_to_envelope needs 0 < dt < 1/kappa");
  const auto n = static_cast<std::size_t>(std::llround(rec.duration / dt));
  std::vector<cplx> env(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * phys::pi);

  const double a = amplitude * std::sqrt(kappa);
  const double decay = std::exp(-0.5 * kappa * dt);
  cplx acc{};
  std::size_t next = 0;
  for (std::size_t m = 0; m < n; ++m) {
    const double t = rec.t_start + dt * static_cast<double>(m);
    acc *= decay;
    while (next < rec.times.size() && rec.times[next] <= t) {
      const double age = t - rec.times[next];
      acc += a * std::exp(-0.5 * kappa * age) * std::polar(1.0, phase(rng));
      ++next;
    }
    env[m] = acc;
  }
  return env;
}

G2Histogram g2_from_events(const EventRecord& rec, double bin, double max_tau) {
  if (rec.times.size() < 2) throw InvalidModel("g2_from_events needs at least two events");
  if (!(bin > 0) || !(max_tau >= bin) || !(max_tau < rec.duration))
    throw InvalidModel("g2_from_events needs 0 < bin <= max_tau < duration");
  const auto nb = static_cast<std::size_t>(std::ceil(max_tau / bin));
  G2Histogram out;
  out.bin = bin;
  out.counts.assign(nb, 0);
  const auto& t = rec.times;
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = i + 1; j < t.size(); ++j) {
      const double d = t[j] - t[i];
      if (d >= max_tau) break;
      const auto k = static_cast<std::size_t>(d / bin);
      if (k < nb) ++out.counts[k];
    }
  }
  const double rate = rec.rate();
  out.tau.resize(nb);
  out.g2.resize(nb);
  out.sigma.resize(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    const double tau = bin * (static_cast<double>(k) + 0.5);
    const double norm = rate * rate * (rec.duration - tau) * bin;
    const auto c = static_cast<double>(out.counts[k]);
    out.tau[k] = tau;
    out.g2[k] = c / norm;
    out.sigma[k] = std::sqrt(std::max(c, 1.0)) / norm;
  }
  return out;
}

std::string events_to_csv(const EventRecord& rec) {
  std::ostringstream os;
  os << "time_s,charge_after,latch_state\n";
  std::size_t tr = 0;
  bool dark = false;
  for (std::size_t i = 0; i < rec.times.size(); ++i) {
    while (tr < rec.latch.size() && rec.latch[tr].time <= rec.times[i]) dark = rec.latch[tr++].dark;
    os << io::fmt(rec.times[i]) << ',' << io::fmt(rec.charge_after[i]) << ','
       << (dark ? "dark" : "bright") << '\n';
  }
  return os.str();
}

}  // namespace jjphoton::dynamics
