#pragma once

// Iterative radix-2 complex FFT with a reusable plan (bit-reversal and
// twiddle tables). Circulant embedding only ever needs power-of-two sizes.

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace sojourn {

class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    if (n == 0 || (n & (n - 1)) != 0) {
      throw std::invalid_argument("FftPlan: size must be a power of two");
    }
    rev_.resize(n);
    std::size_t log2n = 0;
    while ((std::size_t{1} << log2n) < n) ++log2n;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < log2n; ++b) {
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (log2n - 1 - b);
      }
      rev_[i] = r;
    }
    // Twiddles for each stage, forward sign convention e^{-2πi k/len}.
    twiddle_.resize(log2n);
    for (std::size_t s = 0; s < log2n; ++s) {
      const std::size_t len = std::size_t{2} << s;
      twiddle_[s].resize(len / 2);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const double ang = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(len);
        twiddle_[s][k] = {std::cos(ang), std::sin(ang)};
      }
    }
  }

  std::size_t size() const { return n_; }

  // In-place forward transform: X[k] = sum_j x[j] e^{-2πi jk/n}.
  void forward(std::complex<double>* data) const { transform(data, false); }

  // In-place inverse transform without the 1/n factor.
  void inverse_unscaled(std::complex<double>* data) const { transform(data, true); }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  void transform(std::complex<double>* a, bool conj_twiddle) const {
    for (std::size_t i = 0; i < n_; ++i) {
      if (i < rev_[i]) std::swap(a[i], a[rev_[i]]);
    }
    for (std::size_t s = 0; s < twiddle_.size(); ++s) {
      const std::size_t len = std::size_t{2} << s;
      const auto& tw = twiddle_[s];
      for (std::size_t base = 0; base < n_; base += len) {
        for (std::size_t k = 0; k < len / 2; ++k) {
          std::complex<double> w = tw[k];
          if (conj_twiddle) w = std::conj(w);
          const std::complex<double> u = a[base + k];
          const std::complex<double> t = w * a[base + k + len / 2];
          a[base + k] = u + t;
          a[base + k + len / 2] = u - t;
        }
      }
    }
  }

  std::size_t n_;
  std::vector<std::size_t> rev_;
  std::vector<std::vector<std::complex<double>>> twiddle_;
};

}  // namespace sojourn
