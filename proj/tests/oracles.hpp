#pragma once

// Independent reference computations used by the tests. None of these call
// the library routine they are compared against.

#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

#include "jjphoton/dynamics.hpp"

namespace oracle {

using cplx = std::complex<double>;

struct Environment {
  double r = 32.1e3, c = 56.7e-15, l_p = 53e-12;
  double z0 = 110.0, z1 = 22.0, f0 = 6e9, z_load = 50.0;
  double f_cut = 40e9;  // Re Z is zero above this

  // Closed form: R || (C + Lp) in series with the two quarter-wave sections.
  cplx z(double f) const;
  double re_z(double f) const;
};

// P(nu) at nu_k = (k + 1/2) df, k in [-K, K), from the characteristic
// function exp J(t) by FFT.
struct PeOracle {
  double df;
  std::vector<double> nu, p;
};
PeOracle pe_characteristic(const Environment& env, double temperature, double df,
                           double half_span, double t_max = 30e-9);
// Same for any Re Z(f), f >= 0, vanishing above f_cut.
PeOracle pe_characteristic(const std::function<double(double)>& re_z, double f_cut,
                           double temperature, double df, double half_span, double t_max = 30e-9);

// Direct O(N^2) correlators of one block pair, lag -(N-1)..(N-1):
// cross = <S0* S1(+tau)>, product = <P* P(+tau)> with P = S0* S1.
struct Direct {
  std::vector<cplx> cross, product;
};
Direct direct_correlation(const std::vector<cplx>& s0, const std::vector<cplx>& s1);

// Event-level g2 convolved with the detection response of the envelope
// pipeline (box-mode projection, interleaved quadratures, 5-tap FIR), for
// photons with decay rate kappa and raw sampling dt.
std::vector<double> detected_g2(const jjphoton::dynamics::RenewalOracle& events,
                                const std::vector<double>& taus, double kappa, double dt,
                                const std::vector<double>& fir);

}  // namespace oracle
