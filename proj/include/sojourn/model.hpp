#pragma once

// Two-line risk model: parameter validation, critical points, regime
// classification and every derived constant used by the asymptotic
// evaluators. Pure functions on immutable values.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace sojourn {

struct OrderingViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct RangeViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DegenerateCase2Constant : std::domain_error {
  using std::domain_error::domain_error;
};
struct RegimeError : std::logic_error {
  using std::logic_error::logic_error;
};
struct MissingConstant : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct HypothesisViolation : std::domain_error {
  using std::domain_error::domain_error;
};
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Drifts c1 > c2 > 0, capital multipliers q2 > q1 > 0, Hurst exponent
// hurst in (0,1). The strict orderings keep the problem genuinely
// two-dimensional; equal ratios would collapse it to one line.
struct ModelParams {
  double c1;
  double c2;
  double q1;
  double q2;
  double hurst;
};

inline ModelParams validate_params(double c1, double c2, double q1, double q2,
                                   double hurst) {
  if (!(c1 > 0.0) || !(c2 > 0.0) || !(q1 > 0.0) || !(q2 > 0.0)) {
    throw RangeViolation("model: rates and multipliers must be positive");
  }
  if (!(hurst > 0.0) || !(hurst < 1.0)) {
    throw RangeViolation("model: hurst must lie in the open interval (0,1)");
  }
  if (!(c1 > c2) || !(q2 > q1)) {
    throw OrderingViolation("model: need c1 > c2 and q2 > q1");
  }
  return ModelParams{c1, c2, q1, q2, hurst};
}

// Sojourn threshold: either a fixed window T_u == value for all u, or the
// scaled family T_u = value * u^(2 - 1/H) whose normalized limit is value.
enum class ThresholdMode { constant, scaled };

struct SojournThreshold {
  ThresholdMode mode;
  double value;
};

inline SojournThreshold make_threshold(ThresholdMode mode, double value) {
  if (!(value >= 0.0)) throw RangeViolation("threshold: value must be >= 0");
  return SojournThreshold{mode, value};
}

// The window length actually applied at capital u.
inline double threshold_at(const SojournThreshold& st, double hurst, double u) {
  if (st.mode == ThresholdMode::constant) return st.value;
  return st.value * std::pow(u, 2.0 - 1.0 / hurst);
}

// Normalized limit of T_u * u^(1/H - 2). In constant mode the limit is T0
// for H = 1/2, 0 for H > 1/2, and does not conform for H < 1/2 with
// T0 > 0 (nullopt: the asymptotic theory is replaced by the explicit
// two-sided bounds of constant_threshold_bounds).
inline std::optional<double> sojourn_limit(const SojournThreshold& st, double hurst) {
  if (st.mode == ThresholdMode::scaled) return st.value;
  if (hurst == 0.5) return st.value;
  if (hurst > 0.5) return 0.0;
  if (st.value > 0.0) return std::nullopt;
  return 0.0;
}

// Variance maximizers of the rescaled field. t1 < t2 always holds under
// the parameter ordering; the position of t_star against [t1, t2] selects
// the asymptotic regime.
struct CriticalPoints {
  double t_star;
  double t1;
  double t2;
};

inline CriticalPoints critical_points(const ModelParams& p) {
  const double t_star = (p.q2 - p.q1) / (p.c1 - p.c2);
  const double t1 = p.q1 * p.hurst / ((1.0 - p.hurst) * p.c1);
  const double t2 = p.q2 * p.hurst / ((1.0 - p.hurst) * p.c2);
  return CriticalPoints{t_star, t1, t2};
}

// single_line(i): t_star strictly outside [t1,t2]; the two-line problem
// degenerates to line i. single_line_boundary(i): t_star sits on t_i and
// the asymptotics carry an extra factor 1/2. joint: t_star strictly inside.
enum class RegimeKind { single_line, single_line_boundary, joint };

struct Regime {
  RegimeKind kind;
  int line;  // 1 or 2 for the single-line kinds, 0 for joint
};

inline Regime classify_regime(const CriticalPoints& cp, double tol = 1e-9) {
  if (!(tol >= 0.0)) throw RangeViolation("classify_regime: tol must be >= 0");
  if (std::abs(cp.t_star - cp.t1) <= tol * cp.t1) {
    return Regime{RegimeKind::single_line_boundary, 1};
  }
  if (std::abs(cp.t_star - cp.t2) <= tol * cp.t2) {
    return Regime{RegimeKind::single_line_boundary, 2};
  }
  if (cp.t_star < cp.t1) return Regime{RegimeKind::single_line, 1};
  if (cp.t_star > cp.t2) return Regime{RegimeKind::single_line, 2};
  return Regime{RegimeKind::joint, 0};
}

inline std::string regime_name(const Regime& r) {
  switch (r.kind) {
    case RegimeKind::single_line:
      return "single_line_" + std::to_string(r.line);
    case RegimeKind::single_line_boundary:
      return "single_line_boundary_" + std::to_string(r.line);
    case RegimeKind::joint:
      return "joint";
  }
  return "unknown";
}

// Every closed-form constant needed downstream. a and d_bar exist only in
// the joint regime; alpha and c1_alpha/c2_alpha only for constant-mode
// thresholds. Powers of 1/H amplify rounding for small H, so everything
// is evaluated in long double and rounded once.
struct DerivedConstants {
  double d_h;          // peak ratio eta / t_star^H
  double k_h;          // universal prefactor of the one-line asymptotics
  double c_line[2];    // per-line exceedance scale
  double d_line[2];    // per-line sojourn scale entering Berman arguments
  double eta;          // common barrier height at t_star
  double t_prime;      // rescaled window for the two-sided constant
  double drift_slope_neg;  // slope of the piecewise drift for s < 0
  double drift_slope_pos;  // slope for s >= 0
  std::optional<double> a;      // joint-regime prefactor, H < 1/2 branch
  std::optional<double> d_bar;  // joint-regime Berman argument scale
  std::optional<double> alpha;     // constant-mode small-H rate
  std::optional<double> c1_alpha;  // alpha   * d_h^2
  std::optional<double> c2_alpha;  // alpha^2 * d_h^2 / 2
};

inline DerivedConstants derive_constants(const ModelParams& p,
                                         const SojournThreshold& st) {
  const long double c1 = p.c1, c2 = p.c2, q1 = p.q1, q2 = p.q2, h = p.hurst;
  const long double t_star = (q2 - q1) / (c1 - c2);
  const long double eta = c1 * t_star + q1;
  const long double d_h = eta / std::pow(t_star, h);

  DerivedConstants dc{};
  dc.eta = static_cast<double>(eta);
  dc.d_h = static_cast<double>(d_h);
  dc.k_h = static_cast<double>(std::pow(2.0L, 0.5L - 1.0L / (2.0L * h)) *
                               std::sqrt(3.14159265358979323846264338328L) /
                               std::sqrt(h * (1.0L - h)));

  const long double cs[2] = {c1, c2};
  const long double qs[2] = {q1, q2};
  for (int i = 0; i < 2; ++i) {
    dc.c_line[i] = static_cast<double>(
        std::pow(cs[i], h) * std::pow(qs[i], 1.0L - h) /
        (std::pow(h, h) * std::pow(1.0L - h, 1.0L - h)));
    dc.d_line[i] = static_cast<double>(
        cs[i] * cs[i] * std::pow(1.0L - h, 2.0L - 1.0L / h) /
        (std::pow(2.0L, 1.0L / (2.0L * h)) * h * h));
  }

  const long double cross = c1 * q2 - q1 * c2;
  const std::optional<double> t_limit = sojourn_limit(st, p.hurst);
  const long double t_lim = t_limit ? static_cast<long double>(*t_limit) : 0.0L;
  dc.t_prime = static_cast<double>(t_lim * cross * cross /
                                   (2.0L * (c1 - c2) * (c1 - c2)));
  dc.drift_slope_neg = static_cast<double>((c1 * q2 + c2 * q1 - 2.0L * c2 * q2) / cross);
  dc.drift_slope_pos = static_cast<double>((2.0L * c1 * q1 - c1 * q2 - q1 * c2) / cross);

  const Regime regime = classify_regime(critical_points(p));
  if (regime.kind == RegimeKind::joint) {
    long double inv_sum = 0.0L;
    for (int i = 0; i < 2; ++i) {
      const long double denom = std::abs(h * eta - cs[i] * t_star);
      if (denom == 0.0L) {
        throw DegenerateCase2Constant(
            "derive_constants: H*eta == c" + std::to_string(i + 1) +
            "*t_star, prefactor a is undefined");
      }
      inv_sum += 1.0L / denom;
    }
    dc.a = static_cast<double>(inv_sum * std::pow(t_star, h) *
                               std::pow(d_h, 1.0L / h - 1.0L) /
                               std::pow(2.0L, 1.0L / (2.0L * h)));
    dc.d_bar = static_cast<double>(std::pow(eta, 1.0L / h) /
                                   (std::pow(2.0L, 1.0L / (2.0L * h)) * t_star * t_star));
  }

  if (st.mode == ThresholdMode::constant) {
    const long double t0 = st.value;
    const long double alpha =
        std::pow(t0, 2.0L * h) / (2.0L * std::pow(t_star, 2.0L * h));
    dc.alpha = static_cast<double>(alpha);
    dc.c1_alpha = static_cast<double>(alpha * d_h * d_h);
    dc.c2_alpha = static_cast<double>(alpha * alpha * d_h * d_h / 2.0L);
  }
  return dc;
}

// Piecewise-linear drift correction entering the two-sided constant.
inline double eval_drift(const DerivedConstants& dc, double s) {
  return s * (s < 0.0 ? dc.drift_slope_neg : dc.drift_slope_pos);
}

}  // namespace sojourn
