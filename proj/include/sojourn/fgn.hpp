#pragma once

// Exact sampling of fractional Gaussian noise on uniform grids via
// circulant embedding, with a dense Cholesky fallback. Increment samples
// are exact in distribution, not approximations: the whole acceptance
// suite leans on that.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sojourn/fft.hpp"
#include "sojourn/model.hpp"
#include "sojourn/rng.hpp"

namespace sojourn {

struct EmbeddingFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridSpec {
  double dt;
  std::size_t n_steps;
  double horizon() const { return dt * static_cast<double>(n_steps); }
};

inline GridSpec make_grid(double dt, std::size_t n_steps) {
  if (!(dt > 0.0)) throw RangeViolation("grid: dt must be > 0");
  if (n_steps < 1) throw RangeViolation("grid: n_steps must be >= 1");
  return GridSpec{dt, n_steps};
}

inline GridSpec grid_for_horizon(double dt, double horizon) {
  return make_grid(dt, static_cast<std::size_t>(std::ceil(horizon / dt)));
}

// Autocovariance of fGn increments at integer lag.
inline double fgn_autocovariance(double hurst, std::size_t lag, double dt) {
  const double two_h = 2.0 * hurst;
  const double k = static_cast<double>(lag);
  if (lag == 0) return std::pow(dt, two_h);
  return std::pow(dt, two_h) *
         (std::pow(k + 1.0, two_h) - 2.0 * std::pow(k, two_h) +
          std::pow(k - 1.0, two_h)) /
         2.0;
}

struct EmbeddingRecord {
  double hurst;
  std::size_t n_steps;
  std::size_t embedding_size;
  double min_eigenvalue_ratio;  // min eigenvalue / max eigenvalue
  std::size_t clipped;          // eigenvalues clipped to zero
  bool cholesky_fallback;
};

// In-process log of every spectral-nonnegativity check.
inline std::vector<EmbeddingRecord>& embedding_log() {
  static std::vector<EmbeddingRecord> log;
  return log;
}

inline std::mutex& embedding_log_mutex() {
  static std::mutex m;
  return m;
}

struct FbmPath {
  GridSpec grid;
  double hurst;
  std::vector<double> values;  // n_steps + 1 entries, values[0] = 0
};

// Stationary Gaussian increment sampler. Immutable after construction,
// safe for concurrent use from many threads each holding its own RNG.
class FgnSampler {
 public:
  FgnSampler(double hurst, GridSpec grid, double eigen_tol = 1e-10,
             std::size_t cholesky_limit = 4096, bool force_cholesky = false)
      : hurst_(hurst), grid_(grid) {
    if (!(hurst > 0.0) || !(hurst < 1.0)) {
      throw RangeViolation("fgn: hurst must lie in (0,1)");
    }
    if (hurst == 0.5 && !force_cholesky) {
      iid_ = true;
      sqrt_dt_ = std::sqrt(grid.dt);
      record(EmbeddingRecord{hurst, grid.n_steps, 0, 1.0, 0, false});
      return;
    }
    const std::size_t n = grid.n_steps;
    std::size_t m = 1;
    while (m < 2 * n) m <<= 1;
    m_ = m;
    double max_eig = 0.0, min_eig = 0.0;
    std::size_t clipped = 0;
    bool ok = !force_cholesky;
    if (ok) {
      plan_ = std::make_shared<FftPlan>(m);
      std::vector<std::complex<double>> c(m);
      for (std::size_t j = 0; j <= m / 2; ++j) {
        c[j] = fgn_autocovariance(hurst, j, grid.dt);
      }
      for (std::size_t j = m / 2 + 1; j < m; ++j) c[j] = c[m - j];
      plan_->forward(c.data());
      for (const auto& v : c) {
        max_eig = std::max(max_eig, v.real());
        min_eig = std::min(min_eig, v.real());
      }
      const double floor_at = -eigen_tol * max_eig;
      weights_.resize(m);
      for (std::size_t j = 0; j < m; ++j) {
        double lambda = c[j].real();
        if (lambda < 0.0) {
          if (lambda < floor_at) {
            ok = false;
            break;
          }
          lambda = 0.0;
          ++clipped;
        }
        weights_[j] = std::sqrt(lambda / static_cast<double>(m));
      }
    }
    if (ok) {
      record(EmbeddingRecord{hurst, n, m, min_eig / max_eig, clipped, false});
      return;
    }
    // Embedding rejected (or fallback forced): dense Cholesky of the
    // Toeplitz covariance.
    weights_.clear();
    plan_.reset();
    if (n > cholesky_limit) {
      throw EmbeddingFailure(
          "fgn: circulant embedding failed and n_steps = " + std::to_string(n) +
          " exceeds the dense fallback budget");
    }
    cholesky_ = true;
    chol_.assign(n * (n + 1) / 2, 0.0);
    std::vector<double> gamma(n);
    for (std::size_t k = 0; k < n; ++k) gamma[k] = fgn_autocovariance(hurst, k, grid.dt);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double sum = gamma[i - j];
        for (std::size_t k = 0; k < j; ++k) sum -= at(i, k) * at(j, k);
        if (i == j) {
          if (sum <= 0.0) throw EmbeddingFailure("fgn: covariance not positive definite");
          at(i, j) = std::sqrt(sum);
        } else {
          at(i, j) = sum / at(j, j);
        }
      }
    }
    record(EmbeddingRecord{hurst, n, m, max_eig > 0.0 ? min_eig / max_eig : 1.0, 0,
                           true});
  }

  double hurst() const { return hurst_; }
  const GridSpec& grid() const { return grid_; }
  bool iid_fast_path() const { return iid_; }
  bool uses_cholesky() const { return cholesky_; }
  std::size_t embedding_size() const { return m_; }

  // Two independent increment draws from one synthesis pass.
  void sample_pair(Xoshiro256pp& rng, std::span<double> out1,
                   std::span<double> out2) const {
    const std::size_t n = grid_.n_steps;
    if (out1.size() < n || out2.size() < n) {
      throw std::invalid_argument("fgn: output spans too small");
    }
    if (iid_) {
      for (std::size_t k = 0; k < n; ++k) out1[k] = sqrt_dt_ * normal_(rng);
      for (std::size_t k = 0; k < n; ++k) out2[k] = sqrt_dt_ * normal_(rng);
      return;
    }
    if (cholesky_) {
      dense_sample(rng, out1);
      dense_sample(rng, out2);
      return;
    }
    std::vector<std::complex<double>>& a = scratch();
    a.resize(m_);
    for (std::size_t j = 0; j < m_; ++j) {
      a[j] = {weights_[j] * normal_(rng), weights_[j] * normal_(rng)};
    }
    plan_->forward(a.data());
    for (std::size_t k = 0; k < n; ++k) {
      out1[k] = a[k].real();
      out2[k] = a[k].imag();
    }
  }

  std::vector<double> sample(Xoshiro256pp& rng) const {
    std::vector<double> out1(grid_.n_steps), out2(grid_.n_steps);
    sample_pair(rng, out1, out2);
    return out1;
  }

 private:
  static thread_local std::vector<std::complex<double>> scratch_storage_;
  static std::vector<std::complex<double>>& scratch() { return scratch_storage_; }

  void dense_sample(Xoshiro256pp& rng, std::span<double> out) const {
    const std::size_t n = grid_.n_steps;
    std::vector<double> z(n);
    for (auto& v : z) v = normal_(rng);
    for (std::size_t i = n; i-- > 0;) {
      double sum = 0.0;
      for (std::size_t k = 0; k <= i; ++k) sum += at_const(i, k) * z[k];
      out[i] = sum;
    }
  }

  double& at(std::size_t i, std::size_t j) { return chol_[i * (i + 1) / 2 + j]; }
  double at_const(std::size_t i, std::size_t j) const {
    return chol_[i * (i + 1) / 2 + j];
  }

  static void record(const EmbeddingRecord& r) {
    std::lock_guard<std::mutex> lock(embedding_log_mutex());
    embedding_log().push_back(r);
  }

  double hurst_;
  GridSpec grid_;
  bool iid_ = false;
  bool cholesky_ = false;
  double sqrt_dt_ = 0.0;
  std::size_t m_ = 0;
  std::shared_ptr<FftPlan> plan_;
  std::vector<double> weights_;
  std::vector<double> chol_;
  ZigguratNormal normal_;
};

inline thread_local std::vector<std::complex<double>> FgnSampler::scratch_storage_;

// Cumulative path with values[0] = 0.
inline FbmPath sample_fbm_path(const FgnSampler& sampler, Xoshiro256pp& rng) {
  FbmPath path{sampler.grid(), sampler.hurst(),
               std::vector<double>(sampler.grid().n_steps + 1, 0.0)};
  std::vector<double> inc = sampler.sample(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < inc.size(); ++k) {
    acc += inc[k];
    path.values[k + 1] = acc;
  }
  return path;
}

}  // namespace sojourn
