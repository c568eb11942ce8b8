#pragma once

#include <span>
#include <vector>

namespace jjphoton::detail {

// General banded matrix with LU factorization (LAPACK gbtrf/gbtrs).
class BandedLU {
 public:
  BandedLU(int n, int kl, int ku);

  // Adds v to A(i, j); entries outside the band are dropped.
  void add(int i, int j, double v);
  void factor();
  // Solves A x = b in place.
  void solve(std::span<double> b) const;
  int size() const { return n_; }

 private:
  int n_, kl_, ku_, ldab_;
  std::vector<double> ab_;
  std::vector<int> ipiv_;
  bool factored_ = false;
};

}  // namespace jjphoton::detail
