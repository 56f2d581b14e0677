#pragma once

// Closed forms for the Brownian case, Gaussian survival utilities, and the
// asymptotic evaluators for every regime branch. Deterministic and
// stateless: the two Monte-Carlo constants are injected values, never
// computed here.

#include <cmath>
#include <optional>
#include <string>

#include "sojourn/model.hpp"

namespace sojourn {

// Survival function of a standard Gaussian.
inline double normal_survival(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

inline double normal_density(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
}

// log of the survival function, stable far into the tail.
inline double log_normal_survival(double x) {
  if (x < 30.0) return std::log(normal_survival(x));
  // Asymptotic series of the Mill ratio; relative error < 1e-13 for x >= 30.
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - 0.5 * std::log(2.0 * 3.14159265358979323846) - std::log(x) +
         std::log(series);
}

struct BoundsOnSurvival {
  double lower;
  double upper;
};

// Two-sided bounds (1 - 1/x^2) phi(x)/x <= Psi(x) <= phi(x)/x, valid as an
// enclosure for x > 1 (the lower bound is vacuous below that).
inline BoundsOnSurvival mills_bounds(double x) {
  if (!(x > 0.0)) throw DomainError("mills_bounds: x must be > 0");
  const double base = normal_density(x) / x;
  return {(1.0 - 1.0 / (x * x)) * base, base};
}

// Classical one-line ruin probability for drifted Brownian motion.
inline double bm_classical_ruin(double c, double u) {
  if (!(c > 0.0)) throw DomainError("bm_classical_ruin: c must be > 0");
  if (!(u >= 0.0)) throw DomainError("bm_classical_ruin: u must be >= 0");
  return std::exp(-2.0 * c * u);
}

// Exact one-line sojourn-ruin probability for Brownian motion: the
// probability that time spent above the drifted barrier exceeds T.
inline double bm_sojourn_exact(double c, double u, double T) {
  if (!(c > 0.0)) throw DomainError("bm_sojourn_exact: c must be > 0");
  if (!(u >= 0.0) || !(T >= 0.0)) {
    throw DomainError("bm_sojourn_exact: u and T must be >= 0");
  }
  const double front = 2.0 * (1.0 + c * c * T) * normal_survival(c * std::sqrt(T)) -
                       c * std::sqrt(2.0 * T / 3.14159265358979323846) *
                           std::exp(-c * c * T / 2.0);
  return front * std::exp(-2.0 * c * u);
}

// Sojourn constant at Hurst 1/2 in closed form; obtained by matching the
// Brownian closed form against the general one-line asymptotics, where the
// Gaussian tail prefactors cancel exactly. Decreasing, value 1 at x = 0.
inline double berman_half_closed_form(double x) {
  if (!(x >= 0.0)) throw DomainError("berman_half_closed_form: x must be >= 0");
  return (2.0 + x) * normal_survival(std::sqrt(x / 2.0)) -
         std::sqrt(x / 3.14159265358979323846) * std::exp(-x / 4.0);
}

// Asymptotic value together with its log (the linear scale underflows for
// large u). Values are intentionally not clamped to [0,1]: outside the
// asymptotic range the formulas may exceed 1 and callers should see that.
struct AsymptoticValue {
  double value;
  double log_value;
  std::string branch;
  std::optional<double> berman_input;
  std::optional<double> two_sided_input;
};

// Injected Monte-Carlo constants for the branches that need them.
struct ConstantInputs {
  std::optional<double> berman;     // sojourn constant value
  std::optional<double> two_sided;  // two-sided drifted constant value
};

// One-line sojourn asymptotics for barrier c, capital multiplier q. At
// Hurst 1/2 this is the exact Brownian closed form (written via the
// matched constant); otherwise the general formula with an injected
// sojourn-constant value.
inline AsymptoticValue one_line_sojourn_asymptotic(
    double c, double q, double hurst, double u, double t_limit,
    std::optional<double> berman_value = std::nullopt) {
  if (!(c > 0.0) || !(q > 0.0)) {
    throw DomainError("one_line_sojourn_asymptotic: c, q must be > 0");
  }
  if (!(hurst > 0.0) || !(hurst < 1.0)) {
    throw RangeViolation("one_line_sojourn_asymptotic: hurst in (0,1)");
  }
  AsymptoticValue out{};
  if (hurst == 0.5) {
    const double d1 = 2.0 * c * c;  // line sojourn scale at H = 1/2
    const double b = berman_value ? *berman_value
                                  : berman_half_closed_form(t_limit * d1);
    out.value = b * bm_classical_ruin(c, q * u);
    out.log_value = std::log(b) - 2.0 * c * q * u;
    out.branch = "one_line_brownian";
    out.berman_input = b;
    return out;
  }
  if (!berman_value) {
    throw MissingConstant(
        "one_line_sojourn_asymptotic: sojourn constant required for hurst != 1/2");
  }
  const double h = hurst;
  const double k_h = std::pow(2.0, 0.5 - 1.0 / (2.0 * h)) *
                     std::sqrt(3.14159265358979323846) / std::sqrt(h * (1.0 - h));
  const double c_scale = std::pow(c, h) * std::pow(q, 1.0 - h) /
                         (std::pow(h, h) * std::pow(1.0 - h, 1.0 - h));
  const double arg = c_scale * std::pow(u, 1.0 - h);
  const double poly = std::pow(arg, 1.0 / h - 1.0);
  out.value = k_h * (*berman_value) * poly * normal_survival(arg);
  out.log_value = std::log(k_h) + std::log(*berman_value) + (1.0 / h - 1.0) * std::log(arg) +
                  log_normal_survival(arg);
  out.branch = "one_line_general";
  out.berman_input = berman_value;
  return out;
}

// Full asymptotic evaluator. The regime is taken as given (so each branch
// is directly testable); thresholds supply both the window mode and the
// normalized limit.
inline AsymptoticValue sojourn_ruin_asymptotic(const ModelParams& p,
                                               const Regime& regime,
                                               const DerivedConstants& dc,
                                               const SojournThreshold& st, double u,
                                               const ConstantInputs& inputs = {}) {
  const std::optional<double> t_lim = sojourn_limit(st, p.hurst);
  if (!t_lim) {
    throw HypothesisViolation(
        "sojourn_ruin_asymptotic: constant window with hurst < 1/2 has no "
        "normalized limit; use constant_threshold_bounds");
  }
  const double T = *t_lim;

  if (regime.kind != RegimeKind::joint) {
    const double c = regime.line == 1 ? p.c1 : p.c2;
    const double q = regime.line == 1 ? p.q1 : p.q2;
    AsymptoticValue out =
        one_line_sojourn_asymptotic(c, q, p.hurst, u, T, inputs.berman);
    if (regime.kind == RegimeKind::single_line_boundary) {
      out.value *= 0.5;
      out.log_value -= std::log(2.0);
    }
    out.branch = regime_name(regime) + ":" + out.branch;
    return out;
  }

  // Joint regime.
  AsymptoticValue out{};
  const double arg = dc.d_h * std::pow(u, 1.0 - p.hurst);
  const double log_psi = log_normal_survival(arg);
  if (p.hurst > 0.5) {
    if (st.value > 0.0) {
      // Both window modes grow too fast for the joint branch above 1/2:
      // the required vanishing of T_u * u^(2 - 1/H) fails.
      throw HypothesisViolation(
          "sojourn_ruin_asymptotic: joint regime with hurst > 1/2 requires a "
          "vanishing rescaled window");
    }
    out.value = normal_survival(arg);
    out.log_value = log_psi;
    out.branch = "joint:h_above_half";
    return out;
  }
  if (p.hurst == 0.5) {
    if (!inputs.two_sided) {
      throw MissingConstant(
          "sojourn_ruin_asymptotic: two-sided constant required for the joint "
          "branch at hurst = 1/2");
    }
    out.value = *inputs.two_sided * normal_survival(arg);
    out.log_value = std::log(*inputs.two_sided) + log_psi;
    out.branch = "joint:h_half";
    out.two_sided_input = inputs.two_sided;
    return out;
  }
  if (!inputs.berman) {
    throw MissingConstant(
        "sojourn_ruin_asymptotic: sojourn constant required for the joint "
        "branch at hurst < 1/2");
  }
  if (!dc.a) {
    throw RegimeError(
        "sojourn_ruin_asymptotic: joint-regime constants absent from "
        "derived constants");
  }
  const double poly_exp = (1.0 - p.hurst) * (1.0 / p.hurst - 2.0);
  out.value = *inputs.berman * *dc.a * std::pow(u, poly_exp) * normal_survival(arg);
  out.log_value = std::log(*inputs.berman) + std::log(*dc.a) +
                  poly_exp * std::log(u) + log_psi;
  out.branch = "joint:h_below_half";
  out.berman_input = inputs.berman;
  return out;
}

// Two-sided envelope for the constant-window, small-Hurst regime where the
// normalized limit fails to exist. Everything on log scale; the multiplier
// c_bar in (0,1] is caller-supplied and kept out of the stored envelope.
struct BoundsPair {
  double lower_envelope;  // log lower bound with c_bar factored out
  double upper;           // log upper bound
  double c_bar;
};

inline BoundsPair constant_threshold_bounds(const ModelParams& p,
                                            const DerivedConstants& dc, double t0,
                                            double u, double c_bar = 1.0) {
  if (!(p.hurst < 0.5)) {
    throw RegimeError("constant_threshold_bounds: requires hurst < 1/2");
  }
  if (!(t0 > 0.0)) {
    throw RegimeError("constant_threshold_bounds: requires a positive window");
  }
  const Regime regime = classify_regime(critical_points(p));
  if (regime.kind != RegimeKind::joint) {
    throw RegimeError("constant_threshold_bounds: requires the joint regime");
  }
  if (!(c_bar > 0.0 && c_bar <= 1.0)) {
    throw DomainError("constant_threshold_bounds: c_bar must lie in (0,1]");
  }
  const double h = p.hurst;
  const double t_star = critical_points(p).t_star;
  const double arg = dc.d_h * std::pow(u, 1.0 - h);
  const double log_psi = log_normal_survival(arg);
  const double alpha = std::pow(t0, 2.0 * h) / (2.0 * std::pow(t_star, 2.0 * h));
  const double c1a = alpha * dc.d_h * dc.d_h;
  const double c2a = alpha * alpha * dc.d_h * dc.d_h / 2.0;
  BoundsPair out{};
  out.c_bar = c_bar;
  out.lower_envelope = log_psi - c1a * std::pow(u, 2.0 - 4.0 * h) -
                       c2a * std::pow(u, 2.0 * (1.0 - 3.0 * h));
  const double upper_arg =
      std::pow(u, 1.0 - 2.0 * h) * std::pow(t0, h) * dc.d_h / (2.0 * std::pow(t_star, h));
  out.upper = std::log(2.0) + log_psi + log_normal_survival(upper_arg);
  return out;
}

}  // namespace sojourn
