#include "jjphoton/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>

#include "jjphoton/error.hpp"

namespace jjphoton::fft {

namespace {

// FFTW planning is not thread-safe; execution is.
std::mutex plan_mutex;

struct Plan {
  fftw_plan p = nullptr;
  ~Plan() {
    if (p) {
      std::lock_guard lock(plan_mutex);
      fftw_destroy_plan(p);
    }
  }
};

fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

std::vector<cplx> complex_transform(std::span<const cplx> x, int sign) {
  std::vector<cplx> in(x.begin(), x.end()), out(x.size());
  if (x.empty()) return out;
  Plan plan;
  {
    std::lock_guard lock(plan_mutex);
    plan.p = fftw_plan_dft_1d(static_cast<int>(x.size()), as_fftw(in.data()), as_fftw(out.data()),
                              sign, FFTW_ESTIMATE);
  }
  if (!plan.p) throw NumericalError("fftw planning failed");
  fftw_execute(plan.p);
  return out;
}

}  // namespace

FixedPlan::FixedPlan(std::size_t n, bool forward) : n_(n) {
  in_ = reinterpret_cast<cplx*>(fftw_malloc(sizeof(cplx) * n));
  out_ = reinterpret_cast<cplx*>(fftw_malloc(sizeof(cplx) * n));
  std::fill(in_, in_ + n, cplx{});
  {
    std::lock_guard lock(plan_mutex);
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), as_fftw(in_), as_fftw(out_),
                             forward ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  if (!plan_) {
    fftw_free(in_);
    fftw_free(out_);
    throw NumericalError("fftw planning failed");
  }
}

FixedPlan::~FixedPlan() {
  {
    std::lock_guard lock(plan_mutex);
    fftw_destroy_plan(static_cast<fftw_plan>(plan_));
  }
  fftw_free(in_);
  fftw_free(out_);
}

std::span<const cplx> FixedPlan::execute() {
  fftw_execute(static_cast<fftw_plan>(plan_));
  return {out_, n_};
}

std::vector<cplx> forward(std::span<const cplx> x) { return complex_transform(x, FFTW_FORWARD); }
std::vector<cplx> inverse(std::span<const cplx> x) { return complex_transform(x, FFTW_BACKWARD); }

std::vector<cplx> forward_real(std::span<const double> x, std::size_t n) {
  if (x.size() > n) throw NumericalError("forward_real: input longer than transform");
  std::vector<double> in(n, 0.0);
  std::copy(x.begin(), x.end(), in.begin());
  std::vector<cplx> out(n / 2 + 1);
  Plan plan;
  {
    std::lock_guard lock(plan_mutex);
    plan.p = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), as_fftw(out.data()),
                                  FFTW_ESTIMATE);
  }
  if (!plan.p) throw NumericalError("fftw planning failed");
  fftw_execute(plan.p);
  return out;
}

std::vector<double> inverse_real(std::span<const cplx> x, std::size_t n) {
  if (x.size() != n / 2 + 1) throw NumericalError("inverse_real: expected n/2+1 bins");
  // c2r destroys its input.
  std::vector<cplx> in(x.begin(), x.end());
  std::vector<double> out(n);
  Plan plan;
  {
    std::lock_guard lock(plan_mutex);
    plan.p = fftw_plan_dft_c2r_1d(static_cast<int>(n), as_fftw(in.data()), out.data(),
                                  FFTW_ESTIMATE);
  }
  if (!plan.p) throw NumericalError("fftw planning failed");
  fftw_execute(plan.p);
  return out;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> convolve(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  Convolver conv(b, a.size());
  return conv(a);
}

Convolver::Convolver(std::span<const double> kernel, std::size_t signal_length)
    : n_(next_pow2(kernel.size() + signal_length - 1)),
      signal_length_(signal_length),
      kernel_length_(kernel.size()),
      kernel_hat_(forward_real(kernel, n_)) {}

std::vector<double> Convolver::operator()(std::span<const double> signal) const {
  if (signal.size() != signal_length_) throw NumericalError("Convolver: signal length mismatch");
  auto s = forward_real(signal, n_);
  const double scale = 1.0 / static_cast<double>(n_);
  for (std::size_t k = 0; k < s.size(); ++k) s[k] *= kernel_hat_[k] * scale;
  auto full = inverse_real(s, n_);
  full.resize(signal_length_ + kernel_length_ - 1);
  return full;
}

}  // namespace jjphoton::fft
