#include "jjphoton/circuit_fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>

#include "jjphoton/constants.hpp"
#include "jjphoton/error.hpp"
#include "parallel.hpp"

namespace jjphoton::extraction {

double& CircuitParams::operator[](int i) {
  switch (i) {
    case 0: return c;
    case 1: return l_p;
    case 2: return z0;
    case 3: return z1;
    case 4: return t;
    case 5: return ic;
  }
  throw InvalidModel("CircuitParams index out of range");
}

double CircuitParams::operator[](int i) const { return const_cast<CircuitParams&>(*this)[i]; }

bool FitBounds::contains(const CircuitParams& p) const {
  for (int i = 0; i < CircuitParams::size; ++i)
    if (p[i] < lo[i] || p[i] > hi[i]) return false;
  return true;
}

pe::EmissionMap forward_map(const CircuitParams& p, const ForwardModel& model,
                            const pe::FrequencyGrid& f_grid, const pe::FrequencyGrid& vj_grid) {
  network::EnvironmentParams env{model.r, p.c, p.l_p, p.z0, p.z1, model.f0, model.z_load};
  const auto circuit = network::junction_environment(env);
  const auto z = pe::environment_from_circuit(circuit, network::junction_plus,
                                              network::junction_minus, model.pe_half_span,
                                              model.z_df);
  const auto grid = pe::FrequencyGrid::symmetric(model.pe_half_span, model.pe_df);
  const auto pe = pe::solve_minnhagen(z, p.t, grid, model.solver);
  return pe::emission_rate_density(pe, z, {p.ic}, f_grid, vj_grid);
}

namespace {

using Vec = Eigen::VectorXd;
using Arr6 = Eigen::Matrix<double, CircuitParams::size, 1>;

}  // namespace

CircuitFit fit_circuit(const pe::EmissionMap& data, double fixed_r, const CircuitParams& init,
                       const FitOptions& opts) {
  data.validate();
  if (!(fixed_r > 0)) throw InvalidModel("fit_circuit needs R > 0");
  if (!opts.bounds.contains(init)) throw InvalidModel("fit_circuit: initial point outside bounds");
  const double scale = *std::max_element(data.gamma.begin(), data.gamma.end());
  if (!(scale > 0)) throw InvalidModel("fit_circuit: data map is empty");
  if (!(opts.relative_floor > 0)) throw InvalidModel("fit_circuit: relative_floor must be > 0");
  std::vector<double> weight(data.gamma.size());
  for (std::size_t k = 0; k < weight.size(); ++k)
    weight[k] = 1.0 / (std::abs(data.gamma[k]) + opts.relative_floor * scale);
  ForwardModel model = opts.model;
  model.r = fixed_r;
  constexpr int np = CircuitParams::size;

  // Parameters are optimized in units of their initial magnitude.
  Arr6 unit;
  for (int i = 0; i < np; ++i)
    unit(i) = init[i] != 0.0 ? std::abs(init[i]) : 0.5 * (opts.bounds.lo[i] + opts.bounds.hi[i]);
  auto to_params = [&](const Arr6& u) {
    CircuitParams p;
    for (int i = 0; i < np; ++i) p[i] = u(i) * unit(i);
    return p;
  };
  auto project = [&](Arr6 u) {
    for (int i = 0; i < np; ++i)
      u(i) = std::clamp(u(i), opts.bounds.lo[i] / unit(i), opts.bounds.hi[i] / unit(i));
    return u;
  };

  CircuitFit out;
  auto residual = [&](const Arr6& u) {
    const auto m = forward_map(to_params(u), model, data.f_grid, data.vj_grid);
    Vec r(static_cast<Eigen::Index>(m.gamma.size()));
    for (std::size_t k = 0; k < m.gamma.size(); ++k)
      r(static_cast<Eigen::Index>(k)) = (m.gamma[k] - data.gamma[k]) * weight[k];
    return r;
  };

  Arr6 u = Arr6::Ones();
  Vec r = residual(u);
  ++out.evaluations;
  double cost = 0.5 * r.squaredNorm();
  double lambda = 1e-3;
  out.message = "max_iter reached";

  for (int iter = 0; iter < opts.max_iter && !out.converged; ++iter) {
    if (cost == 0.0) {
      out.converged = true;
      out.message = "exact fit";
      break;
    }
    Eigen::MatrixXd jac(r.size(), np);
    std::array<Vec, np> cols;
    std::array<double, np> steps{};
    detail::parallel_for(np, opts.threads, [&](std::size_t i) {
      Arr6 up = u;
      double step = opts.diff_step * std::max(std::abs(u(i)), 1e-3);
      if (up(i) + step > opts.bounds.hi[i] / unit(i)) step = -step;
      up(i) += step;
      steps[i] = step;
      cols[i] = residual(up);
    });
    out.evaluations += np;
    for (int i = 0; i < np; ++i) jac.col(i) = (cols[i] - r) / steps[i];
    const Eigen::Matrix<double, np, np> a = jac.transpose() * jac;
    const Arr6 g = jac.transpose() * r;
    Arr6 d = a.diagonal().cwiseMax(1e-30 * std::max(1.0, a.diagonal().maxCoeff()));

    while (true) {
      Eigen::Matrix<double, np, np> m = a;
      m.diagonal() += lambda * d;
      const Arr6 un = project(u + m.ldlt().solve(-g));
      if ((un - u).norm() <= opts.xtol * (u.norm() + opts.xtol)) {
        out.converged = true;
        out.message = "step below xtol";
        break;
      }
      const Vec rn = residual(un);
      ++out.evaluations;
      const double cn = 0.5 * rn.squaredNorm();
      if (cn < cost) {
        const bool small = cost - cn <= opts.ftol * cost;
        u = un;
        r = rn;
        cost = cn;
        ++out.iterations;
        lambda = std::max(lambda / 10.0, 1e-12);
        if (small) {
          out.converged = true;
          out.message = "cost decrease below ftol";
        }
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e12) {
        out.converged = true;
        out.message = "no descent direction";
        break;
      }
    }
  }
  out.params = to_params(u);
  out.ec_hz = phys::charging_frequency(out.params.c);
  out.residual_norm = std::sqrt(2.0 * cost);
  return out;
}

}  // namespace jjphoton::extraction
