#pragma once

// Small statistics helpers shared by the estimators and the harness.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace sojourn {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Wilson score interval for a binomial proportion.
inline Interval wilson_interval(std::size_t hits, std::size_t n, double z = 1.96) {
  if (n == 0) throw std::invalid_argument("wilson_interval: n == 0");
  const double nh = static_cast<double>(hits);
  const double nn = static_cast<double>(n);
  const double z2 = z * z;
  const double center = (nh + z2 / 2.0) / (nn + z2);
  const double half =
      z / (nn + z2) * std::sqrt(nh * (nn - nh) / nn + z2 / 4.0);
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  std::size_t n = 0;
};

// Ordinary least squares y = a + b x with the usual slope standard error.
inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("linear_fit: need >= 2 matched points");
  }
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("linear_fit: degenerate abscissae");
  LinearFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += r * r;
  }
  if (n > 2) fit.slope_stderr = std::sqrt(ss_res / static_cast<double>(n - 2) / sxx);
  return fit;
}

struct MeanVar {
  double mean = 0.0;
  double variance = 0.0;  // sample variance (n-1)
  std::size_t n = 0;
  double stderr_of_mean() const {
    return n > 1 ? std::sqrt(variance / static_cast<double>(n)) : 0.0;
  }
};

inline MeanVar mean_var(const std::vector<double>& v) {
  MeanVar out;
  out.n = v.size();
  if (v.empty()) return out;
  double s = 0.0;
  for (double x : v) s += x;
  out.mean = s / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.variance = ss / static_cast<double>(v.size() - 1);
  }
  return out;
}

// Nodes/weights of an n-point Gauss-Legendre rule on [a,b].
inline void gauss_legendre(int n, double a, double b, std::vector<double>& nodes,
                           std::vector<double>& weights) {
  nodes.assign(static_cast<std::size_t>(n), 0.0);
  weights.assign(static_cast<std::size_t>(n), 0.0);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Newton iteration from the Chebyshev-based initial guess.
    double x = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[static_cast<std::size_t>(i)] = mid - half * x;
    nodes[static_cast<std::size_t>(n - 1 - i)] = mid + half * x;
    weights[static_cast<std::size_t>(i)] = 2.0 * half / ((1.0 - x * x) * pp * pp);
    weights[static_cast<std::size_t>(n - 1 - i)] = weights[static_cast<std::size_t>(i)];
  }
}

}  // namespace sojourn
