#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "jjphoton/network.hpp"

namespace jjphoton::pe {

// Uniform grid f_i = f_min + i*df, i in [0, n).
struct FrequencyGrid {
  double f_min = 0.0;
  double df = 0.0;
  std::size_t n = 0;

  double at(std::size_t i) const { return f_min + df * static_cast<double>(i); }
  double f_max() const { return at(n - 1); }
  std::vector<double> points() const;
  void validate() const;
  // Symmetric about zero with samples at (k + 1/2) df.
  bool is_symmetric() const;

  static FrequencyGrid uniform(double f_min, double df, std::size_t n);
  // 2*round(half_span/df) points at +-(k + 1/2) df.
  static FrequencyGrid symmetric(double half_span, double df);
};

// Re Z(f) tabulated on f >= 0, linear in between, even in f and zero outside
// the table.
struct EnvironmentImpedance {
  FrequencyGrid grid;
  std::vector<double> re_z;
  std::string provenance;

  double operator()(double f) const;
  void validate() const;
};

// Tabulates Re Z between the two junction nodes of a circuit on [0, f_max].
// Samples at f = 0 or on a line pole are taken a hair off the singular point.
EnvironmentImpedance environment_from_circuit(const network::CircuitModel& model,
                                              const std::string& node_plus,
                                              const std::string& node_minus, double f_max,
                                              double df, int threads = 1);

EnvironmentImpedance environment_from_function(const std::function<double(double)>& re_z,
                                               double f_max, double df, std::string provenance);

struct JunctionParams {
  double ic;
  void validate() const;
};

struct SolverOptions {
  double tol = 1e-10;     // relative residual of the discretized equation
  int max_iter = 500;     // total GMRES iterations
  int restart = 100;
  int band = 64;          // half-bandwidth of the preconditioner
};

struct SolverInfo {
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  double mass_clipped = 0.0;  // negative mass removed before renormalizing
};

struct PEFunction {
  FrequencyGrid grid;
  std::vector<double> values;  // per Hz
  double beta = 0.0;           // 1/J
  SolverInfo info;

  double temperature() const;
  // Linear interpolation; throws outside the grid span.
  double at(double nu) const;
  bool contains(double nu) const;
};

PEFunction solve_minnhagen(const EnvironmentImpedance& z, double temperature,
                           const FrequencyGrid& grid, const SolverOptions& opts = {});

struct EmissionMap {
  FrequencyGrid f_grid;
  FrequencyGrid vj_grid;
  std::vector<double> gamma;  // row-major: vj rows, f columns; photons/(s Hz)
  double ic = 0.0;
  double temperature = 0.0;

  double& at(std::size_t ivj, std::size_t jf) { return gamma[ivj * f_grid.n + jf]; }
  double at(std::size_t ivj, std::size_t jf) const { return gamma[ivj * f_grid.n + jf]; }
  void validate() const;
};

EmissionMap emission_rate_density(const PEFunction& pe, const EnvironmentImpedance& z,
                                  const JunctionParams& j, const FrequencyGrid& f_grid,
                                  const FrequencyGrid& vj_grid);

// Cooper-pair tunneling rate at Josephson frequency vj, events/s.
double tunneling_rate(const PEFunction& pe, const JunctionParams& j, double vj);

// Integral of gamma over [f_lo, f_hi] at one bias (linear in vj between rows).
double band_rate(const EmissionMap& map, double f_lo, double f_hi, double vj);
// Same integral for every vj row.
std::vector<double> band_profile(const EmissionMap& map, double f_lo, double f_hi);

struct PECheck {
  double norm_residual;
  double balance_residual;
};

PECheck check_pe(const PEFunction& pe);

}  // namespace jjphoton::pe
