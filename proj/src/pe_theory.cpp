#include "jjphoton/pe_theory.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numeric>
#include <sstream>

#include "banded.hpp"
#include "gmres.hpp"
#include "jjphoton/constants.hpp"
#include "jjphoton/error.hpp"
#include "jjphoton/fft.hpp"

namespace jjphoton::pe {

using phys::h;
using phys::k_B;

std::vector<double> FrequencyGrid::points() const {
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = at(i);
  return p;
}

void FrequencyGrid::validate() const {
  if (!(df > 0) || n < 2 || !std::isfinite(f_min))
    throw InvalidModel("frequency grid needs df > 0 and at least two points");
}

bool FrequencyGrid::is_symmetric() const {
  if (n % 2 != 0) return false;
  return std::abs(f_min + 0.5 * df * static_cast<double>(n - 1)) < 1e-6 * df;
}

FrequencyGrid FrequencyGrid::uniform(double f_min, double df, std::size_t n) {
  FrequencyGrid g{f_min, df, n};
  g.validate();
  return g;
}

FrequencyGrid FrequencyGrid::symmetric(double half_span, double df) {
  const auto k = static_cast<std::size_t>(std::llround(half_span / df));
  FrequencyGrid g{-(static_cast<double>(k) - 0.5) * df, df, 2 * k};
  g.validate();
  return g;
}

double EnvironmentImpedance::operator()(double f) const {
  const double t = (std::abs(f) - grid.f_min) / grid.df;
  const auto last = static_cast<double>(grid.n - 1);
  if (t < 0.0 || t > last) return 0.0;
  const auto i = std::min(static_cast<std::size_t>(t), grid.n - 2);
  const double w = t - static_cast<double>(i);
  return (1.0 - w) * re_z[i] + w * re_z[i + 1];
}

void EnvironmentImpedance::validate() const {
  grid.validate();
  if (grid.f_min < 0.0) throw InvalidModel("impedance table must start at f >= 0");
  if (re_z.size() != grid.n) throw InvalidModel("impedance table size mismatch");
  for (double v : re_z)
    if (!(v >= 0) || !std::isfinite(v)) throw InvalidModel("Re Z must be finite and >= 0");
}

EnvironmentImpedance environment_from_function(const std::function<double(double)>& re_z,
                                               double f_max, double df, std::string provenance) {
  EnvironmentImpedance z;
  z.grid = FrequencyGrid::uniform(0.0, df, static_cast<std::size_t>(std::llround(f_max / df)) + 1);
  z.re_z.resize(z.grid.n);
  for (std::size_t k = 0; k < z.grid.n; ++k) z.re_z[k] = std::max(0.0, re_z(z.grid.at(k)));
  z.provenance = std::move(provenance);
  z.validate();
  return z;
}

EnvironmentImpedance environment_from_circuit(const network::CircuitModel& model,
                                              const std::string& node_plus,
                                              const std::string& node_minus, double f_max,
                                              double df, int threads) {
  const auto n = static_cast<std::size_t>(std::llround(f_max / df)) + 1;
  std::vector<double> f(n);
  for (std::size_t k = 0; k < n; ++k) f[k] = df * static_cast<double>(k);
  // The admittance form is undefined at DC; the limit is reached well before 1e-6 df.
  f[0] = 1e-6 * df;
  auto table = network::input_impedance(model, node_plus, f, node_minus, threads);
  for (std::size_t k = 0; k < n; ++k) {
    double nudge = 1e-9;
    while (!std::isfinite(table.z[k].real())) {
      const double fk = f[k] * (1.0 + nudge);
      table.z[k] = network::input_impedance(model, node_plus, std::span(&fk, 1), node_minus).z[0];
      nudge *= 10.0;
      if (nudge > 1e-3) throw NumericalError("impedance stays singular near f=" + std::to_string(f[k]));
    }
  }
  EnvironmentImpedance z;
  z.grid = FrequencyGrid::uniform(0.0, df, n);
  z.re_z.resize(n);
  // Passive networks give Re Z >= 0; clip rounding noise.
  for (std::size_t k = 0; k < n; ++k) z.re_z[k] = std::max(0.0, table.z[k].real());
  z.provenance = "circuit:" + node_plus + "-" + (node_minus.empty() ? model.ground() : node_minus);
  return z;
}

void JunctionParams::validate() const {
  if (!(ic > 0) || !std::isfinite(ic)) throw InvalidModel("critical current must be positive");
}

double PEFunction::temperature() const { return 1.0 / (k_B * beta); }

bool PEFunction::contains(double nu) const {
  const double t = (nu - grid.f_min) / grid.df;
  return t >= -1e-9 && t <= static_cast<double>(grid.n - 1) + 1e-9;
}

double PEFunction::at(double nu) const {
  if (!contains(nu)) {
    std::ostringstream msg;
    msg << "nu=" << nu << " Hz outside P grid [" << grid.f_min << ", " << grid.f_max() << "]";
    throw InvalidModel(msg.str());
  }
  const double t = std::clamp((nu - grid.f_min) / grid.df, 0.0, static_cast<double>(grid.n - 1));
  const auto i = std::min(static_cast<std::size_t>(t), grid.n - 2);
  const double w = t - static_cast<double>(i);
  return (1.0 - w) * values[i] + w * values[i + 1];
}

namespace {

// Cell-averaged kernel W_m = (1/df) int hat_m(f) K(f) df with
// K(f) = (2/R_Q) Re Z(f) / (1 - exp(-beta h f)), for m in [-(n-1), n-1].
// At m = 0 the pole cancels through K(s) + K(-s) = (2/R_Q) Re Z(s).
std::vector<double> kernel_weights(const EnvironmentImpedance& z, double beta, double df,
                                   std::size_t n) {
  using quad = boost::math::quadrature::gauss<double, 16>;
  std::vector<double> s, sw;
  for (std::size_t i = 0; i < quad::abscissa().size(); ++i) {
    const double x = quad::abscissa()[i], w = quad::weights()[i];
    for (double sign : {-1.0, 1.0}) {
      if (x == 0.0 && sign < 0) continue;
      s.push_back(0.5 * (1.0 + sign * x) * df);
      sw.push_back(0.5 * w * df);
    }
  }
  const double c = 2.0 / phys::R_Q;
  auto kfun = [&](double f) { return c * z(f) / (-std::expm1(-beta * h * f)); };

  const auto nm = 2 * n - 1;
  std::vector<double> w(nm, 0.0);
  for (std::size_t a = 0; a < nm; ++a) {
    const double m = static_cast<double>(a) - static_cast<double>(n - 1);
    double acc = 0.0;
    for (std::size_t q = 0; q < s.size(); ++q) {
      const double hat = 1.0 - s[q] / df;
      const double kv = (a == n - 1) ? c * z(s[q]) : kfun(m * df + s[q]) + kfun(m * df - s[q]);
      acc += sw[q] * hat * kv;
    }
    w[a] = acc / df;
  }
  return w;
}

}  // namespace

// Discretizes nu P(nu) = int P(nu - f) K(f) df by product integration of the
// piecewise-linear P. Unknowns are P on nu > 0; the negative half follows from
// detailed balance. The normalization is appended as a bordering row with a
// Lagrange-type column on the lowest row, and the system is solved by GMRES
// preconditioned with a band LU of the local part of the operator.
PEFunction solve_minnhagen(const EnvironmentImpedance& z, double temperature,
                           const FrequencyGrid& grid, const SolverOptions& opts) {
  if (!(temperature > 0)) throw InvalidModel("solve_minnhagen needs T > 0");
  grid.validate();
  z.validate();
  if (!grid.is_symmetric()) throw InvalidModel("P grid must be symmetric with half-cell offset");
  const double beta = 1.0 / (k_B * temperature);
  if (grid.f_max() < 5.0 * k_B * temperature / h)
    throw InvalidModel("P grid narrower than 5 k_B T / h");

  const std::size_t n = grid.n, half = n / 2;
  const double df = grid.df;
  const auto wts = kernel_weights(z, beta, df, n);
  const fft::Convolver conv(wts, n);

  std::vector<double> nu(half), eb(half), nrm(half);
  for (std::size_t k = 0; k < half; ++k) {
    nu[k] = grid.at(half + k);
    eb[k] = std::exp(-beta * h * nu[k]);
    nrm[k] = df * (1.0 + eb[k]);
  }
  auto unfold = [&](const double* p) {
    std::vector<double> full(n);
    for (std::size_t k = 0; k < half; ++k) {
      full[half + k] = p[k];
      full[half - 1 - k] = eb[k] * p[k];
    }
    return full;
  };

  const auto nh = static_cast<Eigen::Index>(half);
  constexpr double lambda_scale = 0.1;
  auto apply = [&](const Eigen::VectorXd& x) {
    const auto c = conv(unfold(x.data()));
    Eigen::VectorXd r(nh + 1);
    double norm = 0.0;
    for (std::size_t k = 0; k < half; ++k) {
      r(static_cast<Eigen::Index>(k)) = nu[k] * x(static_cast<Eigen::Index>(k)) -
                                         df * c[half + k + n - 1];
      norm += nrm[k] * x(static_cast<Eigen::Index>(k));
    }
    r(0) += lambda_scale * x(nh);
    r(nh) = norm;
    return r;
  };

  const int band = std::max(1, std::min(opts.band, static_cast<int>(half) - 1));
  detail::BandedLU lu(static_cast<int>(half), band, band);
  for (std::size_t k = 0; k < half; ++k) {
    const int ki = static_cast<int>(k);
    lu.add(ki, ki, nu[k]);
    for (int m = -band; m <= band; ++m) {
      const long jf = static_cast<long>(half + k) - m;
      const double wv = -df * wts[static_cast<std::size_t>(m + static_cast<long>(n) - 1)];
      if (jf >= static_cast<long>(half)) {
        lu.add(ki, static_cast<int>(jf - static_cast<long>(half)), wv);
      } else if (jf >= 0) {
        const auto j = static_cast<std::size_t>(static_cast<long>(half) - 1 - jf);
        lu.add(ki, static_cast<int>(j), wv * eb[j]);
      }
    }
  }
  lu.factor();
  auto precond = [&](const Eigen::VectorXd& r) {
    Eigen::VectorXd y = r;
    lu.solve(std::span<double>(y.data(), half));
    return y;
  };

  // Initial guess: normalized Gaussian at zero of width max(k_B T / h, 2 df).
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(nh + 1);
  const double width = std::max(k_B * temperature / h, 2.0 * df);
  double mass = 0.0;
  for (std::size_t k = 0; k < half; ++k) {
    x0(static_cast<Eigen::Index>(k)) = std::exp(-0.5 * nu[k] * nu[k] / (width * width));
    mass += nrm[k] * x0(static_cast<Eigen::Index>(k));
  }
  x0.head(nh) /= mass;

  Eigen::VectorXd b = Eigen::VectorXd::Zero(nh + 1);
  b(nh) = 1.0;
  const auto sol = detail::gmres(apply, precond, b, x0, opts.tol, opts.restart, opts.max_iter);

  PEFunction pe;
  pe.grid = grid;
  pe.beta = beta;
  pe.values = unfold(sol.x.data());
  double total = 0.0, clipped = 0.0;
  for (double& v : pe.values) {
    if (v < 0) {
      clipped -= v * df;
      v = 0.0;
    }
    total += v * df;
  }
  if (!(total > 0)) throw NumericalError("Minnhagen solve produced no positive mass");
  for (double& v : pe.values) v /= total;
  pe.info = {sol.iterations, sol.residual, sol.converged, clipped};
  return pe;
}

void EmissionMap::validate() const {
  f_grid.validate();
  vj_grid.validate();
  if (gamma.size() != f_grid.n * vj_grid.n) throw InvalidModel("emission map size mismatch");
}

EmissionMap emission_rate_density(const PEFunction& pe, const EnvironmentImpedance& z,
                                  const JunctionParams& j, const FrequencyGrid& f_grid,
                                  const FrequencyGrid& vj_grid) {
  j.validate();
  f_grid.validate();
  vj_grid.validate();
  if (!(f_grid.f_min > 0)) throw InvalidModel("emission map needs f > 0");
  const double lo = vj_grid.f_min - f_grid.f_max(), hi = vj_grid.f_max() - f_grid.f_min;
  if (!pe.contains(lo) || !pe.contains(hi)) {
    std::ostringstream msg;
    msg << "P grid [" << pe.grid.f_min << ", " << pe.grid.f_max() << "] Hz must cover [" << lo
        << ", " << hi << "] Hz";
    throw InvalidModel(msg.str());
  }
  EmissionMap map{f_grid, vj_grid, std::vector<double>(f_grid.n * vj_grid.n), j.ic,
                  pe.temperature()};
  const double pref = 0.5 * j.ic * j.ic / h;
  for (std::size_t jf = 0; jf < f_grid.n; ++jf) {
    const double f = f_grid.at(jf);
    const double zf = pref * z(f) / f;
    for (std::size_t iv = 0; iv < vj_grid.n; ++iv)
      map.at(iv, jf) = zf * pe.at(vj_grid.at(iv) - f);
  }
  return map;
}

double tunneling_rate(const PEFunction& pe, const JunctionParams& j, double vj) {
  j.validate();
  return 0.25 * j.ic * j.ic * phys::R_Q * pe.at(vj) / h;
}

namespace {

// Integral over [f_lo, f_hi] of the piecewise-linear interpolant of one row.
double integrate_row(const FrequencyGrid& g, const double* row, double f_lo, double f_hi) {
  auto value = [&](double f) {
    const double t = std::clamp((f - g.f_min) / g.df, 0.0, static_cast<double>(g.n - 1));
    const auto i = std::min(static_cast<std::size_t>(t), g.n - 2);
    const double w = t - static_cast<double>(i);
    return (1.0 - w) * row[i] + w * row[i + 1];
  };
  std::vector<std::pair<double, double>> pts{{f_lo, value(f_lo)}};
  for (std::size_t i = 0; i < g.n; ++i) {
    const double f = g.at(i);
    if (f > f_lo && f < f_hi) pts.emplace_back(f, row[i]);
  }
  pts.emplace_back(f_hi, value(f_hi));
  double acc = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    acc += 0.5 * (pts[i].second + pts[i - 1].second) * (pts[i].first - pts[i - 1].first);
  return acc;
}

void check_band(const EmissionMap& map, double f_lo, double f_hi) {
  if (!(f_hi > f_lo)) throw InvalidModel("band_rate needs f_hi > f_lo");
  const double eps = 1e-9 * map.f_grid.df;
  if (f_lo < map.f_grid.f_min - eps || f_hi > map.f_grid.f_max() + eps)
    throw InvalidModel("band outside the map's f grid");
}

}  // namespace

std::vector<double> band_profile(const EmissionMap& map, double f_lo, double f_hi) {
  map.validate();
  check_band(map, f_lo, f_hi);
  std::vector<double> out(map.vj_grid.n);
  for (std::size_t i = 0; i < map.vj_grid.n; ++i)
    out[i] = integrate_row(map.f_grid, &map.gamma[i * map.f_grid.n], f_lo, f_hi);
  return out;
}

double band_rate(const EmissionMap& map, double f_lo, double f_hi, double vj) {
  map.validate();
  check_band(map, f_lo, f_hi);
  const auto& g = map.vj_grid;
  const double t = (vj - g.f_min) / g.df;
  if (t < -1e-9 || t > static_cast<double>(g.n - 1) + 1e-9)
    throw InvalidModel("vj outside the map's bias grid");
  const double tc = std::clamp(t, 0.0, static_cast<double>(g.n - 1));
  const auto i = std::min(static_cast<std::size_t>(tc), g.n - 2);
  const double w = tc - static_cast<double>(i);
  const double a = integrate_row(map.f_grid, &map.gamma[i * map.f_grid.n], f_lo, f_hi);
  const double b = integrate_row(map.f_grid, &map.gamma[(i + 1) * map.f_grid.n], f_lo, f_hi);
  return (1.0 - w) * a + w * b;
}

PECheck check_pe(const PEFunction& pe) {
  pe.grid.validate();
  if (pe.values.size() != pe.grid.n) throw InvalidModel("PEFunction size mismatch");
  const double total = std::accumulate(pe.values.begin(), pe.values.end(), 0.0) * pe.grid.df;
  PECheck out{total - 1.0, 0.0};
  const double peak = *std::max_element(pe.values.begin(), pe.values.end());
  for (std::size_t k = 0; k < pe.grid.n; ++k) {
    const double nu = pe.grid.at(k);
    if (!(nu > 0) || !pe.contains(-nu)) continue;
    const double pp = pe.values[k], pm = pe.at(-nu);
    if (pp <= 1e-12 * peak || pm <= 1e-12 * peak) continue;
    const double expect = std::exp(-pe.beta * h * nu) * pp;
    out.balance_residual = std::max(out.balance_residual, std::abs(pm / expect - 1.0));
  }
  return out;
}

}  // namespace jjphoton::pe
