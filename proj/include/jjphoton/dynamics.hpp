#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace jjphoton::dynamics {

using cplx = std::complex<double>;

// Flux drive of the SQUID. Ic_eff/Ic0 = |cos(pi * (flux_dc + flux_pulse * g(t)))|
// with g a train of unit Gaussian pulses centred at t_first + n*period.
struct DriveParams {
  bool pulsed = false;
  double period = 6e-9;
  double fwhm = 1.5e-9;
  double t_first = 0.0;
  double flux_dc = 0.0;     // in flux quanta
  double flux_pulse = 0.5;  // in flux quanta

  double ic_ratio(double t) const;
  // First pulse centre strictly after t (infinity without pulses).
  double next_pulse(double t) const;
};

struct LatchParams {
  bool enabled = false;
  // An emission latches when Ic_eff/Ic0 is at least this value.
  double enter_threshold = 0.0;
  // Each drive pulse centre resets the source to bright.
  bool exit_on_frustration = true;
};

struct SourceParams {
  double base_rate = 0.0;        // on-resonance rate with an empty island, 1/s
  double rc_time = 1.64e-9;
  double charging_energy = 0.0;  // J
  double detuning = 0.0;         // nu_J - (f0 + E_C/h), Hz
  double kappa = 1.0 / 0.28e-9;
  double t_eff = 21e-3;
  LatchParams latch;
  DriveParams drive;

  void validate() const;
  // Gaussian window width max(k_B T/h, kappa/2pi) in Hz.
  double window_width() const;
  // Resonance shift per island Cooper pair, 2 E_C / h.
  double charge_shift() const;
  double rate(double charge, double t) const;
};

struct LatchTransition {
  double time;
  bool dark;
};

struct EventRecord {
  std::vector<double> times;
  std::vector<double> charge_after;  // island charge just after each event
  std::vector<LatchTransition> latch;
  double t_start = 0.0;
  double duration = 0.0;
  std::uint64_t seed = 0;
  double rc_time = 0.0;

  double charge_at(double t) const;
  bool dark_at(double t) const;
  double rate() const;
};

// Thinning against the global bound base_rate. Events are kept on
// [t_start, t_start + duration). The island starts empty and bright.
EventRecord simulate_source(const SourceParams& p, double duration, std::uint64_t seed,
                            double t_start = 0.0);

struct RenewalOracle {
  double dt = 0.0;
  std::vector<double> tau;  // k * dt
  std::vector<double> g2;
  double steady_rate = 0.0;
  double mean_interval = 0.0;

  // Linear interpolation, even in tau, 1 beyond the table.
  double operator()(double t) const;
};

// Hazard after an event, rate(t) for t >= 0. Beyond the horizon the hazard is
// taken constant at its last value. With charge_rc > 0 the hazard must depend
// on t only through the island charge exp(-t / charge_rc); the residual charge
// carried into each event then shifts the following recovery, which makes
// successive intervals correlated.
RenewalOracle renewal_g2_oracle(const std::function<double(double)>& hazard, double horizon,
                                double dt, double charge_rc = 0.0);

// Hazard of simulate_source right after an emission from an empty island.
std::function<double(double)> after_event_hazard(const SourceParams& p);

// Classical single-photon packets sqrt(kappa) exp(-kappa t / 2 + i phi), times
// `amplitude`, sampled at t_start + m * dt. Phases are uniform per event.
std::vector<cplx> events_to_envelope(const EventRecord& rec, double kappa, double dt,
                                     double amplitude, std::uint64_t seed);

struct G2Histogram {
  double bin = 0.0;
  std::vector<double> tau;  // bin centres
  std::vector<double> g2;
  std::vector<double> sigma;
  std::vector<std::uint64_t> counts;
};

// Coincidences with 0 < t_j - t_i < max_tau, normalized by
// rate^2 * (duration - tau) * bin.
G2Histogram g2_from_events(const EventRecord& rec, double bin, double max_tau);

std::string events_to_csv(const EventRecord& rec);

}  // namespace jjphoton::dynamics
