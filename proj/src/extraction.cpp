#include "jjphoton/extraction.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "jjphoton/constants.hpp"
#include "jjphoton/error.hpp"
#include "jjphoton/fft.hpp"

namespace jjphoton::extraction {

using phys::h;

namespace {

// Bias-integrated rate D(f) = int gamma(f, nu_J) dnu_J per f column.
std::vector<double> bias_integral(const pe::EmissionMap& map) {
  std::vector<double> d(map.f_grid.n, 0.0);
  for (std::size_t i = 0; i < map.vj_grid.n; ++i)
    for (std::size_t j = 0; j < map.f_grid.n; ++j) d[j] += map.at(i, j);
  for (double& v : d) v *= map.vj_grid.df;
  return d;
}

void normalize(WeightFunction& w) {
  double s = 0.0;
  for (double v : w.w) s += v;
  s *= w.grid.df;
  if (!(s > 0)) throw NumericalError("weight function has no support");
  for (double& v : w.w) v /= s;
}

bool same_grid(const pe::FrequencyGrid& a, const pe::FrequencyGrid& b) {
  return a.n == b.n && std::abs(a.df - b.df) <= 1e-9 * a.df &&
         std::abs(a.f_min - b.f_min) <= 1e-6 * a.df;
}

void require_grid(const WeightFunction& w, const pe::FrequencyGrid& g, WeightRole role,
                  const char* what) {
  if (w.role != role) throw InvalidModel(std::string(what) + ": wrong weight role");
  if (!same_grid(w.grid, g) || w.w.size() != g.n)
    throw InvalidModel(std::string(what) + ": weight grid does not match the data grid");
}

// c(m) = df * sum_k w[k] P[k - m] for m in [-(n-1), n-1], stored at m + n - 1.
class PCorrelator {
 public:
  explicit PCorrelator(const pe::PEFunction& pe)
      : df_(pe.grid.df), conv_(std::vector<double>(pe.values.rbegin(), pe.values.rend()),
                              pe.grid.n) {}
  std::vector<double> operator()(std::span<const double> w) const {
    auto c = conv_(w);
    for (double& v : c) v *= df_;
    return c;
  }

 private:
  double df_;
  fft::Convolver conv_;
};

double thermal_factor(double beta, double f, double df) {
  if (f == 0.0) f = 0.5 * df;
  return 1.0 / std::abs(std::expm1(-beta * h * f));
}

}  // namespace

WeightFunction signal_sigma_p(const pe::EmissionMap& map) {
  map.validate();
  WeightFunction w{map.f_grid, bias_integral(map), WeightRole::sigma_p};
  normalize(w);
  return w;
}

WeightFunction flat_sigma_p(const pe::EmissionMap& map) {
  map.validate();
  WeightFunction w{map.f_grid, std::vector<double>(map.f_grid.n, 1.0), WeightRole::sigma_p};
  normalize(w);
  return w;
}

WeightFunction default_sigma_beta(const pe::PEFunction& pe) {
  WeightFunction w{pe.grid, std::vector<double>(pe.grid.n, 0.0), WeightRole::sigma_beta};
  const double floor = noise_floor * *std::max_element(pe.values.begin(), pe.values.end());
  for (std::size_t k = 0; k < pe.grid.n; ++k) {
    const double nu = pe.grid.at(k);
    if (!(nu > 0) || !pe.contains(-nu)) continue;
    const double pp = pe.values[k], pm = pe.at(-nu);
    if (pp > floor && pm > floor) w.w[k] = pp * pm;
  }
  normalize(w);
  return w;
}

WeightFunction dog_sigma_v(const pe::PEFunction& pe, const SigmaVOptions& opts) {
  if (!(opts.width > 0)) throw InvalidModel("sigma_v width must be positive");
  const auto& g = pe.grid;
  const auto reach = static_cast<long>(std::ceil(5.0 * opts.width / g.df));
  auto gauss = [&](double x) { return std::exp(-0.5 * x * x / (opts.width * opts.width)); };
  // Gaussian-smoothed P evaluated at grid point k.
  auto smoothed = [&](std::size_t k) {
    double acc = 0.0;
    for (long m = -reach; m <= reach; ++m) {
      const long i = static_cast<long>(k) + m;
      if (i < 0 || i >= static_cast<long>(g.n)) continue;
      acc += gauss(static_cast<double>(m) * g.df) * pe.values[static_cast<std::size_t>(i)];
    }
    return acc * g.df;
  };
  auto argmax_in = [&](double lo, double hi) {
    std::size_t best = g.n;
    double best_v = -1.0;
    for (std::size_t k = 0; k < g.n; ++k) {
      const double nu = g.at(k);
      if (nu < lo || nu > hi) continue;
      const double v = smoothed(k);
      if (v > best_v) {
        best_v = v;
        best = k;
      }
    }
    if (best == g.n || !(best_v > 0))
      throw NumericalError("sigma_v: no P signal in a peak window");
    return std::pair{g.at(best), best_v};
  };
  const auto [na, ga] = argmax_in(opts.low_min, opts.low_max);
  const auto [nb, gb] = argmax_in(opts.high_min, opts.high_max);
  WeightFunction w{g, std::vector<double>(g.n), WeightRole::sigma_v};
  for (std::size_t k = 0; k < g.n; ++k)
    w.w[k] = gauss(g.at(k) - na) / ga - gauss(g.at(k) - nb) / gb;
  return w;
}

PEExtraction extract_pe(const pe::EmissionMap& map, const WeightFunction& sigma_p) {
  map.validate();
  require_grid(sigma_p, map.f_grid, WeightRole::sigma_p, "extract_pe");
  const auto& fg = map.f_grid;
  const auto& vg = map.vj_grid;
  const auto d = bias_integral(map);
  const double dmax = *std::max_element(d.begin(), d.end());
  if (!(dmax > 0)) throw NumericalError("extract_pe: map carries no signal");

  PEExtraction out;
  const double nu_min = vg.f_min - fg.f_max(), nu_max = vg.f_max() - fg.f_min;
  const auto n = static_cast<std::size_t>(std::llround((nu_max - nu_min) / vg.df)) + 1;
  out.pe.grid = pe::FrequencyGrid::uniform(nu_min, vg.df, n);
  std::vector<double> acc(n, 0.0), wsum(n, 0.0);
  bool any = false;
  for (std::size_t j = 0; j < fg.n; ++j) {
    if (!(sigma_p.w[j] > 0)) continue;
    const double f = fg.at(j);
    if (!(d[j] > noise_floor * dmax)) {
      std::ostringstream msg;
      msg << "extract_pe: f=" << f << " Hz excluded, bias integral below floor";
      out.warnings.push_back(msg.str());
      continue;
    }
    any = true;
    for (std::size_t k = 0; k < n; ++k) {
      // gamma(f, nu + f), linear in nu_J between rows.
      const double t = (out.pe.grid.at(k) + f - vg.f_min) / vg.df;
      if (t < -1e-9 || t > static_cast<double>(vg.n - 1) + 1e-9) continue;
      const double tc = std::clamp(t, 0.0, static_cast<double>(vg.n - 1));
      const auto i = std::min(static_cast<std::size_t>(tc), vg.n - 2);
      const double w = tc - static_cast<double>(i);
      const double gam = (1.0 - w) * map.at(i, j) + w * map.at(i + 1, j);
      acc[k] += sigma_p.w[j] * gam / d[j];
      wsum[k] += sigma_p.w[j];
    }
  }
  if (!any) throw NumericalError("extract_pe: every weighted f excluded");
  out.pe.values.resize(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    out.pe.values[k] = wsum[k] > 0 ? acc[k] / wsum[k] : 0.0;
    total += out.pe.values[k];
  }
  total *= vg.df;
  for (double& v : out.pe.values) v /= total;
  return out;
}

BetaResult extract_beta(const pe::PEFunction& pe, const WeightFunction& sigma_beta) {
  require_grid(sigma_beta, pe.grid, WeightRole::sigma_beta, "extract_beta");
  const double floor = noise_floor * *std::max_element(pe.values.begin(), pe.values.end());
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < pe.grid.n; ++k) {
    const double nu = pe.grid.at(k);
    if (!(sigma_beta.w[k] > 0) || !(nu > 0) || !pe.contains(-nu)) continue;
    const double pp = pe.values[k], pm = pe.at(-nu);
    if (!(pp > floor) || !(pm > floor)) continue;
    num += sigma_beta.w[k] * std::log(pp / pm) / (h * nu);
    den += sigma_beta.w[k];
  }
  if (!(den > 0)) throw NumericalError("negative-energy signal absent");
  const double beta = num / den;
  if (!(beta > 0)) throw NumericalError("extracted beta is not positive");
  return {beta, 1.0 / (phys::k_B * beta)};
}

IcResult extract_ic(const pe::EmissionMap& map, const pe::PEFunction& pe, double beta,
                    const WeightFunction& sigma_v) {
  map.validate();
  require_grid(sigma_v, pe.grid, WeightRole::sigma_v, "extract_ic");
  if (!(beta > 0)) throw InvalidModel("extract_ic needs beta > 0");
  const auto& g = pe.grid;
  const auto n = static_cast<long>(g.n);
  const auto sf = PCorrelator(pe)(sigma_v.w);
  // sigma_f at any f, linear between multiples of the P grid spacing.
  auto sigma_f = [&](double f) {
    const double t = f / g.df;
    const auto m = static_cast<long>(std::floor(t));
    const double w = t - static_cast<double>(m);
    auto at = [&](long k) { return (k <= -n || k >= n) ? 0.0 : sf[static_cast<std::size_t>(k + n - 1)]; };
    return (1.0 - w) * at(m) + w * at(m + 1);
  };

  double b = 0.0, bscale = 0.0;
  for (std::size_t k = 0; k < g.n; ++k) {
    b += sigma_v.w[k] * pe.values[k] * g.at(k);
    bscale += std::abs(sigma_v.w[k] * pe.values[k] * g.at(k));
  }
  b *= g.df;
  bscale *= g.df;
  if (!(std::abs(b) > noise_floor * bscale)) throw NumericalError("extract_ic: sigma_v moment vanishes");

  const auto d = bias_integral(map);
  double a = 0.0;
  for (std::size_t j = 0; j < map.f_grid.n; ++j) {
    const double f = map.f_grid.at(j);
    a += sigma_f(f) * d[j] * f / (-std::expm1(-beta * h * f));
  }
  a *= map.f_grid.df;
  if (!(a / b > 0)) throw NumericalError("extract_ic: weighted integrals have opposite signs");

  IcResult out{4.0 * phys::e * std::sqrt(a / b), 0.0, {}};
  double inside = 0.0, total = 0.0;
  for (long m = -(n - 1); m <= n - 1; ++m) {
    const double f = static_cast<double>(m) * g.df;
    const double s = std::abs(sf[static_cast<std::size_t>(m + n - 1)]) * thermal_factor(beta, f, g.df);
    total += s;
    if (f >= map.f_grid.f_min && f <= map.f_grid.f_max()) inside += s;
  }
  out.containment = total > 0 ? inside / total : 0.0;
  if (out.containment < 0.9) {
    std::ostringstream msg;
    msg << "extract_ic: only " << out.containment * 100.0
        << "% of sigma_f lies inside the measured band";
    out.warnings.push_back(msg.str());
  }
  return out;
}

WeightFunction fitted_sigma_v(const pe::PEFunction& pe, double beta, double f_lo, double f_hi,
                              const FittedSigmaVOptions& opts) {
  if (!(opts.basis_width > 0) || !(beta > 0)) throw InvalidModel("fitted_sigma_v: bad options");
  const auto& g = pe.grid;
  const auto n = static_cast<long>(g.n);
  std::vector<double> centers;
  for (double mu = 0.0; mu <= std::min(opts.max_center, g.f_max()); mu += opts.basis_width)
    centers.push_back(mu);
  const auto nb = static_cast<Eigen::Index>(centers.size());
  if (nb < 2) throw InvalidModel("fitted_sigma_v: P grid too short for the basis");

  const auto mspan = std::min(n - 1, static_cast<long>(std::floor(opts.f_span / g.df)));
  const PCorrelator corr(pe);
  Eigen::MatrixXd basis(nb, n), phi(nb, 2 * mspan + 1);
  Eigen::VectorXd b(nb);
  const double s2 = opts.basis_width * opts.basis_width;
  for (Eigen::Index i = 0; i < nb; ++i) {
    std::vector<double> gi(g.n);
    double bi = 0.0;
    for (std::size_t k = 0; k < g.n; ++k) {
      const double x = g.at(k) - centers[static_cast<std::size_t>(i)];
      gi[k] = std::exp(-0.5 * x * x / s2);
      basis(i, static_cast<Eigen::Index>(k)) = gi[k];
      bi += gi[k] * pe.values[k] * g.at(k);
    }
    b(i) = bi * g.df;
    const auto c = corr(gi);
    for (long m = -mspan; m <= mspan; ++m)
      phi(i, m + mspan) = c[static_cast<std::size_t>(m + n - 1)];
  }
  Eigen::VectorXd wout(2 * mspan + 1);
  for (long m = -mspan; m <= mspan; ++m) {
    const double f = static_cast<double>(m) * g.df;
    const bool in_band = f >= f_lo && f <= f_hi;
    wout(m + mspan) = in_band ? 0.0 : thermal_factor(beta, f, g.df);
  }
  Eigen::MatrixXd q = phi * wout.asDiagonal() * phi.transpose();
  q.diagonal().array() += opts.ridge * q.trace() / static_cast<double>(nb);
  const Eigen::VectorXd qb = q.ldlt().solve(b);
  const double denom = b.dot(qb);
  if (!(std::abs(denom) > 0)) throw NumericalError("fitted_sigma_v: degenerate moment");
  const Eigen::VectorXd coef = qb / denom;

  WeightFunction w{g, std::vector<double>(g.n), WeightRole::sigma_v};
  const Eigen::VectorXd vals = basis.transpose() * coef;
  for (std::size_t k = 0; k < g.n; ++k) w.w[k] = vals(static_cast<Eigen::Index>(k));
  return w;
}

pe::EnvironmentImpedance extract_impedance(const pe::EmissionMap& map, double ic) {
  if (!(ic > 0)) throw InvalidModel("extract_impedance needs Ic > 0");
  map.validate();
  const auto d = bias_integral(map);
  pe::EnvironmentImpedance z;
  z.grid = map.f_grid;
  z.re_z.resize(d.size());
  for (std::size_t j = 0; j < d.size(); ++j)
    z.re_z[j] = std::max(0.0, 2.0 * h * map.f_grid.at(j) * d[j] / (ic * ic));
  z.provenance = "extracted";
  return z;
}

ExtractionResult extract_all(const pe::EmissionMap& map, const ExtractionOptions& opts) {
  const auto sp = opts.flat_sigma_p ? flat_sigma_p(map) : signal_sigma_p(map);
  auto pex = extract_pe(map, sp);
  const auto br = extract_beta(pex.pe, default_sigma_beta(pex.pe));
  pex.pe.beta = br.beta;
  const auto sv = opts.dog_sigma_v
                      ? dog_sigma_v(pex.pe, opts.dog)
                      : fitted_sigma_v(pex.pe, br.beta, map.f_grid.f_min, map.f_grid.f_max(),
                                       opts.fitted);
  const auto icr = extract_ic(map, pex.pe, br.beta, sv);
  ExtractionResult out{pex.pe,
                       br.beta,
                       br.t_eff,
                       icr.ic,
                       icr.containment,
                       extract_impedance(map, icr.ic),
                       pe::check_pe(pex.pe),
                       std::move(pex.warnings)};
  out.warnings.insert(out.warnings.end(), icr.warnings.begin(), icr.warnings.end());
  return out;
}

}  // namespace jjphoton::extraction
