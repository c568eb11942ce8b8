#pragma once

#include <string>
#include <vector>

#include "jjphoton/pe_theory.hpp"

namespace jjphoton::extraction {

enum class WeightRole { sigma_p, sigma_beta, sigma_v };

// Weights sampled on the grid of the data they act on: the map's f grid for
// sigma_p, the P grid for sigma_beta and sigma_v.
struct WeightFunction {
  pe::FrequencyGrid grid;
  std::vector<double> w;
  WeightRole role;
};

// Relative floor for ratios and logarithms.
inline constexpr double noise_floor = 1e-6;

// sigma_p proportional to the bias-integrated rate at each f.
WeightFunction signal_sigma_p(const pe::EmissionMap& map);
// Flat sigma_p over the f band.
WeightFunction flat_sigma_p(const pe::EmissionMap& map);

// sigma_beta proportional to P(nu) P(-nu) on nu > 0.
WeightFunction default_sigma_beta(const pe::PEFunction& pe);

struct SigmaVOptions {
  double width = 0.2e9;  // Gaussian sigma
  // Search windows for the charging peak and the first photon sideband.
  double low_min = 0.5e9, low_max = 3e9;
  double high_min = 6e9, high_max = 9e9;
};

// Difference of two Gaussians centred on the maxima of the smoothed P in the
// two windows, each divided by the smoothed P there. sigma_v * P then
// vanishes to second order at f = 0.
WeightFunction dog_sigma_v(const pe::PEFunction& pe, const SigmaVOptions& opts = {});

struct FittedSigmaVOptions {
  double basis_width = 0.2e9;  // Gaussian sigma and centre spacing
  double max_center = 20e9;
  double f_span = 30e9;        // |f| range over which leakage is penalized
  double ridge = 1e-9;         // relative Tikhonov term
};

// Gaussian-basis sigma_v whose correlation with P, sigma_f(f), is pushed out
// of [f_lo, f_hi] by least squares. Leakage is weighted by the thermal factor
// 1/|1 - exp(-beta h f)| and the first moment of sigma_v P is fixed to one.
WeightFunction fitted_sigma_v(const pe::PEFunction& pe, double beta, double f_lo, double f_hi,
                              const FittedSigmaVOptions& opts = {});

struct PEExtraction {
  pe::PEFunction pe;  // beta unset
  std::vector<std::string> warnings;
};

PEExtraction extract_pe(const pe::EmissionMap& map, const WeightFunction& sigma_p);

struct BetaResult {
  double beta;
  double t_eff;
};

BetaResult extract_beta(const pe::PEFunction& pe, const WeightFunction& sigma_beta);

struct IcResult {
  double ic;
  // Fraction of |sigma_f| / |1 - exp(-beta h f)| inside the map's f band.
  double containment;
  std::vector<std::string> warnings;
};

IcResult extract_ic(const pe::EmissionMap& map, const pe::PEFunction& pe, double beta,
                    const WeightFunction& sigma_v);

pe::EnvironmentImpedance extract_impedance(const pe::EmissionMap& map, double ic);

struct ExtractionOptions {
  bool flat_sigma_p = false;
  bool dog_sigma_v = false;
  SigmaVOptions dog;
  FittedSigmaVOptions fitted;
};

struct ExtractionResult {
  pe::PEFunction pe;
  double beta;
  double t_eff;
  double ic;
  double containment;
  pe::EnvironmentImpedance z_extracted;
  pe::PECheck check;
  std::vector<std::string> warnings;
};

// extract_pe -> extract_beta -> extract_ic -> extract_impedance.
ExtractionResult extract_all(const pe::EmissionMap& map, const ExtractionOptions& opts = {});

}  // namespace jjphoton::extraction
