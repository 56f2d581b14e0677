#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "sojourn/fgn.hpp"
#include "sojourn/rng.hpp"

using namespace sojourn;

namespace {

// Sample covariance of path values against the exact law, via cumulative
// sums of increments; returns the largest |z| over all upper-triangle
// entries. Covariance-of-product variance uses the Gaussian identity
// Var(X_i X_j) = v_i v_j + c_ij^2.
double max_cov_zscore(double hurst, std::size_t n, std::size_t n_paths,
                      std::uint64_t seed, bool force_cholesky = false) {
  const GridSpec grid = make_grid(1.0 / static_cast<double>(n), n);
  const FgnSampler sampler(hurst, grid, 1e-10, 4096, force_cholesky);
  std::vector<double> inc1(n), inc2(n);
  std::vector<double> acc(n * n, 0.0);
  std::vector<double> path(n);
  const std::size_t pairs = n_paths / 2;
  for (std::size_t p = 0; p < pairs; ++p) {
    auto rng = Xoshiro256pp::for_stream(seed, p);
    sampler.sample_pair(rng, inc1, inc2);
    for (const auto* inc : {&inc1, &inc2}) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        s += (*inc)[k];
        path[k] = s;
      }
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) acc[i * n + j] += path[i] * path[j];
      }
    }
  }
  const double n_eff = static_cast<double>(2 * pairs);
  auto cov_exact = [&](std::size_t i, std::size_t j) {
    const double ti = grid.dt * static_cast<double>(i + 1);
    const double tj = grid.dt * static_cast<double>(j + 1);
    const double two_h = 2.0 * hurst;
    return 0.5 * (std::pow(ti, two_h) + std::pow(tj, two_h) -
                  std::pow(std::abs(ti - tj), two_h));
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double c = cov_exact(i, j);
      const double vi = cov_exact(i, i), vj = cov_exact(j, j);
      const double se = std::sqrt((vi * vj + c * c) / n_eff);
      worst = std::max(worst, std::abs(acc[i * n + j] / n_eff - c) / se);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("increment autocovariance closed form") {
  REQUIRE(fgn_autocovariance(0.5, 0, 1.0) == 1.0);
  for (std::size_t k = 1; k <= 5; ++k) REQUIRE(fgn_autocovariance(0.5, k, 1.0) == 0.0);
  REQUIRE_THAT(fgn_autocovariance(0.75, 1, 1.0),
               Catch::Matchers::WithinRel(0.41421356237309515, 1e-12));
  for (double h : {0.3, 0.6, 0.9}) {
    for (double dt : {0.25, 1.0, 2.0}) {
      REQUIRE_THAT(fgn_autocovariance(h, 0, dt),
                   Catch::Matchers::WithinRel(std::pow(dt, 2.0 * h), 1e-14));
    }
  }
}

TEST_CASE("grid validation") {
  REQUIRE_THROWS_AS(make_grid(0.0, 4), RangeViolation);
  REQUIRE_THROWS_AS(make_grid(0.5, 0), RangeViolation);
  REQUIRE(grid_for_horizon(0.5, 10.0).n_steps == 20);
  REQUIRE(make_grid(0.25, 8).horizon() == 2.0);
}

TEST_CASE("sampling is deterministic in (seed, grid, hurst)") {
  for (double h : {0.3, 0.5, 0.75}) {
    const GridSpec grid = make_grid(0.125, 64);
    const FgnSampler sampler(h, grid);
    auto r1 = Xoshiro256pp::for_stream(123, 7);
    auto r2 = Xoshiro256pp::for_stream(123, 7);
    const auto a = sampler.sample(r1);
    const auto b = sampler.sample(r2);
    REQUIRE(a == b);
    auto r3 = Xoshiro256pp::for_stream(123, 7);
    const auto path = sample_fbm_path(sampler, r3);
    REQUIRE(path.values[0] == 0.0);
    REQUIRE(path.values.size() == 65);
    double s = 0.0;
    for (std::size_t k = 0; k < 64; ++k) {
      s += a[k];
      REQUIRE(path.values[k + 1] == s);
    }
  }
}

TEST_CASE("independent-increment reduction at Hurst 1/2") {
  const std::size_t n = 256, n_paths = 20000;
  const GridSpec grid = make_grid(1.0, n);
  const FgnSampler sampler(0.5, grid);
  REQUIRE(sampler.iid_fast_path());
  std::vector<double> inc1(n), inc2(n);
  std::vector<double> sum(6, 0.0), sumsq(6, 0.0);
  for (std::size_t p = 0; p < n_paths / 2; ++p) {
    auto rng = Xoshiro256pp::for_stream(2024, p);
    sampler.sample_pair(rng, inc1, inc2);
    for (const auto* inc : {&inc1, &inc2}) {
      for (std::size_t lag = 0; lag < 6; ++lag) {
        double acc = 0.0;
        for (std::size_t k = 0; k + lag < n; ++k) acc += (*inc)[k] * (*inc)[k + lag];
        const double g = acc / static_cast<double>(n - lag);
        sum[lag] += g;
        sumsq[lag] += g * g;
      }
    }
  }
  const double m = static_cast<double>(n_paths);
  for (std::size_t lag = 0; lag < 6; ++lag) {
    const double mean = sum[lag] / m;
    const double var = (sumsq[lag] - m * mean * mean) / (m - 1.0);
    const double se = std::sqrt(var / m);
    const double target = lag == 0 ? 1.0 : 0.0;
    INFO("lag " << lag << " mean " << mean << " se " << se);
    REQUIRE(std::abs(mean - target) <= 4.0 * se);
  }
}

TEST_CASE("endpoint variance and self-similarity scaling") {
  {
    // Var B(1) = 1 for any Hurst; H = 0.3 here.
    const std::size_t n = 64, n_paths = 100000;
    const GridSpec grid = make_grid(1.0 / 64, n);
    const FgnSampler sampler(0.3, grid);
    std::vector<double> i1(n), i2(n);
    double s2 = 0.0;
    for (std::size_t p = 0; p < n_paths / 2; ++p) {
      auto rng = Xoshiro256pp::for_stream(31, p);
      sampler.sample_pair(rng, i1, i2);
      double e1 = 0.0, e2 = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        e1 += i1[k];
        e2 += i2[k];
      }
      s2 += e1 * e1 + e2 * e2;
    }
    const double var = s2 / static_cast<double>(n_paths);
    const double se = std::sqrt(2.0 / static_cast<double>(n_paths));
    INFO("endpoint var " << var);
    REQUIRE(std::abs(var - 1.0) <= 3.0 * se);
  }
  {
    // Var B(4) = 4^{2H} Var B(1).
    const double h = 0.6;
    const std::size_t n = 64;
    const std::size_t n_paths = 100000;
    const GridSpec grid = make_grid(4.0 / 64, n);
    const FgnSampler sampler(h, grid);
    std::vector<double> i1(n), i2(n);
    double v1 = 0.0, v4 = 0.0;
    for (std::size_t p = 0; p < n_paths / 2; ++p) {
      auto rng = Xoshiro256pp::for_stream(77, p);
      sampler.sample_pair(rng, i1, i2);
      for (const auto* inc : {&i1, &i2}) {
        double s = 0.0, at1 = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          s += (*inc)[k];
          if (k == 15) at1 = s;  // t = 16 * dt = 1
        }
        v1 += at1 * at1;
        v4 += s * s;
      }
    }
    const double n_d = static_cast<double>(n_paths);
    v1 /= n_d;
    v4 /= n_d;
    const double scale = std::pow(4.0, 2.0 * h);
    const double se = std::sqrt(2.0 * scale * scale + 2.0 * scale * scale) / std::sqrt(n_d);
    INFO("v4 " << v4 << " scaled v1 " << scale * v1);
    REQUIRE(std::abs(v4 - scale * v1) <= 3.0 * se);
  }
}

TEST_CASE("Brownian increments pass a portmanteau independence check") {
  const std::size_t n = 1024, n_paths = 1000, lags = 10;
  const GridSpec grid = make_grid(1.0, n);
  const FgnSampler sampler(0.5, grid);
  std::vector<double> i1(n), i2(n);
  std::size_t rejections = 0;
  for (std::size_t p = 0; p < n_paths / 2; ++p) {
    auto rng = Xoshiro256pp::for_stream(4242, p);
    sampler.sample_pair(rng, i1, i2);
    for (const auto* inc : {&i1, &i2}) {
      double mean = 0.0;
      for (double v : *inc) mean += v;
      mean /= static_cast<double>(n);
      double denom = 0.0;
      for (double v : *inc) denom += (v - mean) * (v - mean);
      double q = 0.0;
      for (std::size_t lag = 1; lag <= lags; ++lag) {
        double num = 0.0;
        for (std::size_t k = 0; k + lag < n; ++k) {
          num += ((*inc)[k] - mean) * ((*inc)[k + lag] - mean);
        }
        const double rho = num / denom;
        q += rho * rho / static_cast<double>(n - lag);
      }
      q *= static_cast<double>(n) * (static_cast<double>(n) + 2.0);
      if (q > 23.209251158954356) ++rejections;  // chi2(10) at level 0.01
    }
  }
  INFO("rejection rate " << static_cast<double>(rejections) / n_paths);
  REQUIRE(static_cast<double>(rejections) / static_cast<double>(n_paths) <= 0.025);
}

TEST_CASE("exact path covariance, circulant route") {
  REQUIRE(max_cov_zscore(0.3, 64, 200000, 555) < 4.0);
  REQUIRE(max_cov_zscore(0.75, 64, 200000, 556) < 4.0);
}

TEST_CASE("exact path covariance, forced dense route") {
  const double worst = max_cov_zscore(0.8, 16, 50000, 557, true);
  REQUIRE(worst < 4.0);
}

TEST_CASE("embedding diagnostics are logged and nonnegative") {
  {
    const FgnSampler s(0.7, make_grid(0.5, 100));
    REQUIRE_FALSE(s.uses_cholesky());
    REQUIRE(s.embedding_size() == 256);
  }
  bool found = false;
  {
    std::lock_guard<std::mutex> lock(embedding_log_mutex());
    for (const auto& r : embedding_log()) {
      if (r.hurst == 0.7 && r.n_steps == 100) {
        found = true;
        REQUIRE(r.min_eigenvalue_ratio >= -1e-10);
        REQUIRE_FALSE(r.cholesky_fallback);
      }
    }
  }
  REQUIRE(found);
  REQUIRE_THROWS_AS(FgnSampler(0.7, make_grid(0.5, 100), 1e-10, 8, true),
                    EmbeddingFailure);
}
