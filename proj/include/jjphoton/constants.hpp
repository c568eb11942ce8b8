#pragma once

#include <numbers>

namespace jjphoton::phys {

// CODATA 2018 exact SI values.
inline constexpr double h = 6.62607015e-34;
inline constexpr double e = 1.602176634e-19;
inline constexpr double k_B = 1.380649e-23;
inline constexpr double N_A = 6.02214076e23;
inline constexpr double pi = std::numbers::pi;

inline constexpr double hbar = h / (2.0 * pi);
inline constexpr double flux_quantum = h / (2.0 * e);
// Superconducting resistance quantum h/(2e)^2.
inline constexpr double R_Q = h / (4.0 * e * e);

// Charging energy (2e)^2/2C expressed as a frequency.
constexpr double charging_frequency(double capacitance) {
  return 2.0 * e * e / (capacitance * h);
}

}  // namespace jjphoton::phys
