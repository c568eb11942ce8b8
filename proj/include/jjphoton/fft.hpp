#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace jjphoton::fft {

using cplx = std::complex<double>;

// Unnormalized transforms: forward uses exp(-i), inverse exp(+i).
std::vector<cplx> forward(std::span<const cplx> x);
std::vector<cplx> inverse(std::span<const cplx> x);

// Real-input transform of x zero-padded to n; returns n/2+1 bins.
std::vector<cplx> forward_real(std::span<const double> x, std::size_t n);
// Inverse of forward_real (unnormalized) for length n.
std::vector<double> inverse_real(std::span<const cplx> x, std::size_t n);

std::size_t next_pow2(std::size_t n);

// Reusable complex transform of fixed size with its own buffers. Not shareable
// between threads; create one per worker.
class FixedPlan {
 public:
  FixedPlan(std::size_t n, bool forward);
  ~FixedPlan();
  FixedPlan(const FixedPlan&) = delete;
  FixedPlan& operator=(const FixedPlan&) = delete;

  std::span<cplx> input() { return {in_, n_}; }
  // Transforms input() and returns the result (valid until the next call).
  std::span<const cplx> execute();
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  cplx* in_;
  cplx* out_;
  void* plan_;
};

// Full linear convolution, length a.size() + b.size() - 1.
std::vector<double> convolve(std::span<const double> a, std::span<const double> b);

// Repeated linear convolution against a fixed kernel.
class Convolver {
 public:
  Convolver(std::span<const double> kernel, std::size_t signal_length);
  // Full linear convolution of a signal of the configured length.
  std::vector<double> operator()(std::span<const double> signal) const;
  std::size_t fft_size() const { return n_; }

 private:
  std::size_t n_;
  std::size_t signal_length_;
  std::size_t kernel_length_;
  std::vector<cplx> kernel_hat_;
};

}  // namespace jjphoton::fft
