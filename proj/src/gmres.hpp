#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace jjphoton::detail {

struct GmresResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double residual = 0.0;  // relative to |b|
  bool converged = false;
};

// Restarted GMRES with right preconditioning: solves A M^-1 y = b, x = M^-1 y.
// `apply` and `precond` map Eigen::VectorXd -> Eigen::VectorXd.
template <class Apply, class Precond>
GmresResult gmres(Apply&& apply, Precond&& precond, const Eigen::VectorXd& b,
                  Eigen::VectorXd x0, double tol, int restart, int max_iter) {
  GmresResult res;
  const double bnorm = b.norm();
  res.x = std::move(x0);
  if (bnorm == 0.0) {
    res.x.setZero();
    res.converged = true;
    return res;
  }
  const auto n = b.size();
  Eigen::MatrixXd v(n, restart + 1), hm = Eigen::MatrixXd::Zero(restart + 1, restart);
  Eigen::VectorXd cs(restart), sn(restart), g(restart + 1);

  Eigen::VectorXd r = b - apply(res.x);
  res.residual = r.norm() / bnorm;
  while (res.iterations < max_iter && res.residual > tol) {
    const double beta = r.norm();
    v.col(0) = r / beta;
    g.setZero();
    g(0) = beta;
    int k = 0;
    for (; k < restart && res.iterations < max_iter; ++k) {
      ++res.iterations;
      Eigen::VectorXd w = apply(precond(v.col(k)));
      // Modified Gram-Schmidt.
      for (int i = 0; i <= k; ++i) {
        hm(i, k) = w.dot(v.col(i));
        w -= hm(i, k) * v.col(i);
      }
      hm(k + 1, k) = w.norm();
      if (hm(k + 1, k) > 0) v.col(k + 1) = w / hm(k + 1, k);
      for (int i = 0; i < k; ++i) {
        const double t = cs(i) * hm(i, k) + sn(i) * hm(i + 1, k);
        hm(i + 1, k) = -sn(i) * hm(i, k) + cs(i) * hm(i + 1, k);
        hm(i, k) = t;
      }
      const double d = std::hypot(hm(k, k), hm(k + 1, k));
      cs(k) = hm(k, k) / d;
      sn(k) = hm(k + 1, k) / d;
      hm(k, k) = d;
      hm(k + 1, k) = 0.0;
      g(k + 1) = -sn(k) * g(k);
      g(k) = cs(k) * g(k);
      res.residual = std::abs(g(k + 1)) / bnorm;
      if (res.residual <= tol) {
        ++k;
        break;
      }
    }
    const Eigen::VectorXd y =
        hm.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    res.x += precond(v.leftCols(k) * y);
    r = b - apply(res.x);
    res.residual = r.norm() / bnorm;
  }
  res.converged = res.residual <= tol;
  return res;
}

}  // namespace jjphoton::detail
