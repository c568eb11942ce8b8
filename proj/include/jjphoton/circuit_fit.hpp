#pragma once

#include <string>

#include "jjphoton/pe_theory.hpp"

namespace jjphoton::extraction {

// Free parameters of the junction-environment model; R is held fixed.
struct CircuitParams {
  double c = 56.7e-15;
  double l_p = 53e-12;
  double z0 = 110.0;
  double z1 = 22.0;
  double t = 21e-3;
  double ic = 0.85e-9;

  static constexpr int size = 6;
  double& operator[](int i);
  double operator[](int i) const;
};

struct FitBounds {
  CircuitParams lo{10e-15, 0.0, 5.0, 5.0, 10e-3, 0.05e-9};
  CircuitParams hi{200e-15, 500e-12, 300.0, 300.0, 100e-3, 5e-9};
  bool contains(const CircuitParams& p) const;
};

// Everything besides the fitted parameters that the forward map depends on.
struct ForwardModel {
  double r = 32.1e3;
  double f0 = 6e9;
  double z_load = 50.0;
  double pe_half_span = 40e9;
  double pe_df = 10e6;
  double z_df = 1.25e6;
  pe::SolverOptions solver;
};

pe::EmissionMap forward_map(const CircuitParams& p, const ForwardModel& model,
                            const pe::FrequencyGrid& f_grid, const pe::FrequencyGrid& vj_grid);

struct FitOptions {
  int max_iter = 40;
  double ftol = 1e-12;       // relative cost decrease
  double xtol = 1e-8;        // relative step
  double diff_step = 1e-5;   // relative finite-difference step
  // Residuals are (model - data) / (|data| + floor * max(data)), which
  // matches multiplicative noise; a large floor gives plain least squares.
  double relative_floor = 1e-3;
  FitBounds bounds;
  ForwardModel model;
  int threads = 1;
};

struct CircuitFit {
  CircuitParams params;
  double ec_hz = 0.0;          // (2e)^2 / 2C / h
  double residual_norm = 0.0;  // norm of the weighted residual vector
  int iterations = 0;          // accepted steps
  int evaluations = 0;
  bool converged = false;
  std::string message;
};

// Damped least squares (Levenberg-Marquardt with Marquardt scaling) on the
// map cells, forward-differenced Jacobian, iterates projected onto the bounds.
CircuitFit fit_circuit(const pe::EmissionMap& data, double fixed_r, const CircuitParams& init,
                       const FitOptions& opts = {});

}  // namespace jjphoton::extraction
