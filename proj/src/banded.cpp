#include "banded.hpp"

#include <lapacke.h>

#include <cstdlib>
#include <string>

#include "jjphoton/error.hpp"

namespace jjphoton::detail {

BandedLU::BandedLU(int n, int kl, int ku)
    : n_(n), kl_(kl), ku_(ku), ldab_(2 * kl + ku + 1),
      ab_(static_cast<std::size_t>(ldab_) * n, 0.0), ipiv_(n) {}

void BandedLU::add(int i, int j, double v) {
  if (i < 0 || j < 0 || i >= n_ || j >= n_) return;
  if (i - j > kl_ || j - i > ku_) return;
  // Column-major band storage with kl extra rows for fill-in.
  ab_[static_cast<std::size_t>(kl_ + ku_ + i - j) + static_cast<std::size_t>(j) * ldab_] += v;
}

void BandedLU::factor() {
  const int info = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n_, n_, kl_, ku_, ab_.data(), ldab_,
                                  ipiv_.data());
  if (info != 0) throw NumericalError("banded LU failed, info=" + std::to_string(info));
  factored_ = true;
}

void BandedLU::solve(std::span<double> b) const {
  if (!factored_) throw NumericalError("BandedLU::solve before factor");
  const int info = LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', n_, kl_, ku_, 1, ab_.data(), ldab_,
                                  ipiv_.data(), b.data(), n_);
  if (info != 0) throw NumericalError("banded solve failed, info=" + std::to_string(info));
}

}  // namespace jjphoton::detail
