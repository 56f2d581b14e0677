#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "sojourn/analytic.hpp"
#include "sojourn/model.hpp"
#include "sojourn/rng.hpp"
#include "sojourn/stats.hpp"

using namespace sojourn;

namespace {

const ModelParams& kP0() {
  static const ModelParams p = validate_params(2, 1, 1, 2, 0.5);
  return p;
}

// Independent oracle for the Gaussian survival function: composite
// Gauss-Legendre quadrature of the density over [x, x+45], no erfc.
double survival_by_quadrature(double x) {
  long double total = 0.0L;
  std::vector<double> nodes, weights;
  for (int seg = 0; seg < 45; ++seg) {
    gauss_legendre(24, x + seg, x + seg + 1.0, nodes, weights);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      total += static_cast<long double>(weights[i]) *
               std::exp(-0.5L * static_cast<long double>(nodes[i]) * nodes[i]);
    }
  }
  return static_cast<double>(total / std::sqrt(2.0L * 3.14159265358979323846264338328L));
}

}  // namespace

TEST_CASE("normal survival matches the quadrature oracle to 14 digits") {
  REQUIRE(normal_survival(0.0) == 0.5);
  // Frozen oracle values (40-digit erfc evaluation).
  REQUIRE_THAT(normal_survival(1.0),
               Catch::Matchers::WithinRel(0.15865525393145705, 1e-14));
  REQUIRE_THAT(normal_survival(2.0),
               Catch::Matchers::WithinRel(0.022750131948179212, 1e-14));
  for (double x : {0.3, 0.5, 1.0, 2.0, 3.0}) {
    REQUIRE_THAT(normal_survival(x),
                 Catch::Matchers::WithinRel(survival_by_quadrature(x), 1e-13));
    REQUIRE_THAT(normal_survival(-x) + normal_survival(x),
                 Catch::Matchers::WithinAbs(1.0, 1e-15));
  }
}

TEST_CASE("log survival is stable into the deep tail") {
  for (double x : {0.5, 2.0, 10.0, 29.9, 30.1, 50.0, 200.0}) {
    if (x < 30.0) {
      REQUIRE_THAT(log_normal_survival(x),
                   Catch::Matchers::WithinRel(std::log(normal_survival(x)), 1e-12));
    } else {
      // Against the Mill bracket, written directly on log scale since the
      // linear bounds underflow out here.
      const double log_upper =
          -0.5 * x * x - std::log(x) - 0.5 * std::log(2.0 * M_PI);
      const double log_lower = log_upper + std::log1p(-1.0 / (x * x));
      REQUIRE(log_normal_survival(x) <= log_upper + 1e-12);
      REQUIRE(log_normal_survival(x) >= log_lower - 1e-12);
    }
  }
}

TEST_CASE("Mill bounds bracket the survival function") {
  const auto at2 = mills_bounds(2.0);
  REQUIRE_THAT(at2.lower, Catch::Matchers::WithinRel(0.020246612442445519, 1e-12));
  REQUIRE_THAT(at2.upper, Catch::Matchers::WithinRel(0.026995483256594026, 1e-12));
  REQUIRE(mills_bounds(1.0).lower == 0.0);
  REQUIRE_THAT(mills_bounds(1.0).upper,
               Catch::Matchers::WithinRel(0.24197072451914337, 1e-12));
  for (double x : {1.01, 1.1, 2.0, 5.0, 10.0, 30.0}) {
    const auto b = mills_bounds(x);
    const double psi = normal_survival(x);
    REQUIRE(b.lower <= psi);
    REQUIRE(psi <= b.upper);
  }
  // Relative width of the bracket is exactly 1/x^2.
  const auto at10 = mills_bounds(10.0);
  REQUIRE_THAT((at10.upper - at10.lower) / at10.upper,
               Catch::Matchers::WithinRel(0.01, 1e-12));
  REQUIRE_THROWS_AS(mills_bounds(0.0), DomainError);
  REQUIRE_THROWS_AS(mills_bounds(-1.0), DomainError);
}

TEST_CASE("classical Brownian ruin") {
  REQUIRE(bm_classical_ruin(1.0, 0.0) == 1.0);
  REQUIRE_THAT(bm_classical_ruin(1.0, 1.0),
               Catch::Matchers::WithinRel(0.1353352832366127, 1e-14));
  REQUIRE(bm_classical_ruin(2.0, 0.5) == bm_classical_ruin(1.0, 1.0));
}

TEST_CASE("exact Brownian sojourn ruin") {
  REQUIRE(bm_sojourn_exact(1.0, 0.0, 0.0) == 1.0);
  REQUIRE_THAT(bm_sojourn_exact(1.0, 1.0, 0.0),
               Catch::Matchers::WithinRel(std::exp(-2.0), 1e-14));
  // Frozen 40-digit evaluation of the closed form.
  REQUIRE_THAT(bm_sojourn_exact(1.0, 1.0, 1.0),
               Catch::Matchers::WithinRel(0.02039226183562850, 1e-12));

  // In [0,1] and nonincreasing in both u and T on a grid.
  for (int iu = 0; iu < 20; ++iu) {
    for (int it = 0; it < 20; ++it) {
      const double u = 0.1 * iu, T = 0.15 * it;
      const double v = bm_sojourn_exact(0.8, u, T);
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
      REQUIRE(bm_sojourn_exact(0.8, u + 0.1, T) <= v + 1e-15);
      REQUIRE(bm_sojourn_exact(0.8, u, T + 0.15) <= v + 1e-15);
    }
  }
}

TEST_CASE("sojourn constant closed form at Hurst 1/2") {
  REQUIRE(berman_half_closed_form(0.0) == 1.0);
  REQUIRE_THAT(berman_half_closed_form(2.0),
               Catch::Matchers::WithinRel(0.15067956668754151, 1e-12));
  double prev = berman_half_closed_form(0.0);
  for (double x = 0.25; x < 30.0; x += 0.25) {
    const double v = berman_half_closed_form(x);
    REQUIRE(v < prev);
    REQUIRE(v > 0.0);
    prev = v;
  }
  REQUIRE(berman_half_closed_form(200.0) < 1e-20);
}

TEST_CASE("one-line asymptotics: Brownian branch equals the closed form") {
  // The matched-constant route and the direct closed form agree to 12
  // significant digits; this is the cancellation of the Gaussian-tail
  // prefactors at Hurst 1/2.
  for (double c : {0.5, 1.0, 2.0}) {
    for (double q : {0.5, 1.0, 2.0}) {
      for (double u : {0.5, 1.0, 2.0}) {
        for (double T : {0.0, 0.5, 1.0}) {
          const AsymptoticValue av = one_line_sojourn_asymptotic(c, q, 0.5, u, T);
          REQUIRE_THAT(av.value, Catch::Matchers::WithinRel(
                                     bm_sojourn_exact(c, q * u, T), 1e-12));
          REQUIRE_THAT(std::exp(av.log_value),
                       Catch::Matchers::WithinRel(av.value, 1e-12));
        }
      }
    }
  }
}

TEST_CASE("one-line asymptotics: general branch instantiates the formula") {
  const double c = 1.0, q = 1.0, h = 0.75, u = 16.0, b = 0.37;
  const AsymptoticValue av = one_line_sojourn_asymptotic(c, q, h, u, 0.0, b);
  const double k_h = std::pow(2.0, 0.5 - 1.0 / (2.0 * h)) * std::sqrt(M_PI) /
                     std::sqrt(h * (1.0 - h));
  const double C = std::pow(c, h) * std::pow(q, 1.0 - h) /
                   (std::pow(h, h) * std::pow(1.0 - h, 1.0 - h));
  const double arg = C * std::pow(u, 0.25);
  const double expected = k_h * b * std::pow(arg, 1.0 / h - 1.0) * normal_survival(arg);
  REQUIRE_THAT(av.value, Catch::Matchers::WithinRel(expected, 1e-13));
  REQUIRE_THROWS_AS(one_line_sojourn_asymptotic(c, q, 0.75, u, 0.0), MissingConstant);
}

TEST_CASE("full evaluator: joint branch above Hurst 1/2") {
  const ModelParams p = validate_params(2, 1, 1, 2, 0.75);
  const DerivedConstants dc =
      derive_constants(p, make_threshold(ThresholdMode::constant, 0.0));
  // Regime forced to joint to exercise the branch in isolation.
  const Regime joint{RegimeKind::joint, 0};
  const AsymptoticValue av = sojourn_ruin_asymptotic(
      p, joint, dc, make_threshold(ThresholdMode::constant, 0.0), 16.0);
  REQUIRE_THAT(av.value, Catch::Matchers::WithinRel(normal_survival(6.0), 1e-13));

  // A growing window violates the vanishing-window hypothesis.
  const ModelParams pj = validate_params(2, 1, 0.5, 2, 0.75);
  REQUIRE(classify_regime(critical_points(pj)).kind == RegimeKind::joint);
  const DerivedConstants dcj =
      derive_constants(pj, make_threshold(ThresholdMode::scaled, 1.0));
  REQUIRE_THROWS_AS(
      sojourn_ruin_asymptotic(pj, classify_regime(critical_points(pj)), dcj,
                              make_threshold(ThresholdMode::scaled, 1.0), 4.0),
      HypothesisViolation);
  REQUIRE_THROWS_AS(
      sojourn_ruin_asymptotic(pj, classify_regime(critical_points(pj)), dcj,
                              make_threshold(ThresholdMode::constant, 0.5), 4.0),
      HypothesisViolation);
}

TEST_CASE("full evaluator: single-line and boundary branches") {
  const ModelParams p = validate_params(1, 0.5, 1, 1.1, 0.5);
  const Regime r = classify_regime(critical_points(p));
  REQUIRE(r.kind == RegimeKind::single_line);
  REQUIRE(r.line == 1);
  const SojournThreshold st = make_threshold(ThresholdMode::constant, 0.8);
  const DerivedConstants dc = derive_constants(p, st);
  for (double u : {1.0, 3.0}) {
    const AsymptoticValue av = sojourn_ruin_asymptotic(p, r, dc, st, u);
    REQUIRE_THAT(av.value,
                 Catch::Matchers::WithinRel(bm_sojourn_exact(1.0, u, 0.8), 1e-12));
  }

  // t_star == t1 carries the extra factor 1/2.
  const ModelParams pb = validate_params(1, 0.5, 1, 1.5, 0.5);
  const CriticalPoints cpb = critical_points(pb);
  REQUIRE(cpb.t_star == cpb.t1);
  const Regime rb = classify_regime(cpb);
  REQUIRE(rb.kind == RegimeKind::single_line_boundary);
  const SojournThreshold st0 = make_threshold(ThresholdMode::constant, 0.0);
  const DerivedConstants dcb = derive_constants(pb, st0);
  const AsymptoticValue av = sojourn_ruin_asymptotic(pb, rb, dcb, st0, 2.0);
  REQUIRE_THAT(av.value,
               Catch::Matchers::WithinRel(0.5 * std::exp(-2.0 * 1.0 * 1.0 * 2.0), 1e-12));
}

TEST_CASE("full evaluator: joint branches at and below Hurst 1/2") {
  const SojournThreshold st = make_threshold(ThresholdMode::constant, 1.0);
  const Regime joint{RegimeKind::joint, 0};
  {
    const DerivedConstants dc = derive_constants(kP0(), st);
    ConstantInputs in;
    in.two_sided = 0.42;
    const AsymptoticValue av = sojourn_ruin_asymptotic(kP0(), joint, dc, st, 9.0, in);
    REQUIRE_THAT(av.value,
                 Catch::Matchers::WithinRel(0.42 * normal_survival(9.0), 1e-13));
    REQUIRE_THROWS_AS(sojourn_ruin_asymptotic(kP0(), joint, dc, st, 9.0),
                      MissingConstant);
  }
  {
    // Joint at H = 1/4 with a scaled window.
    const ModelParams p = validate_params(2, 0.5, 1, 2.5, 0.25);
    REQUIRE(classify_regime(critical_points(p)).kind == RegimeKind::joint);
    const SojournThreshold sts = make_threshold(ThresholdMode::scaled, 1.0);
    const DerivedConstants dc = derive_constants(p, sts);
    ConstantInputs in;
    in.berman = 0.77;
    const double u = 4.0;
    const AsymptoticValue av = sojourn_ruin_asymptotic(p, joint, dc, sts, u, in);
    const double arg = dc.d_h * std::pow(u, 0.75);
    const double expected =
        0.77 * *dc.a * std::pow(u, 0.75 * 2.0) * normal_survival(arg);
    REQUIRE_THAT(av.value, Catch::Matchers::WithinRel(expected, 1e-12));
    REQUIRE_THROWS_AS(sojourn_ruin_asymptotic(p, joint, dc, sts, u),
                      MissingConstant);

    // Constant positive window below Hurst 1/2: routed to the bounds.
    const SojournThreshold stc = make_threshold(ThresholdMode::constant, 1.0);
    const DerivedConstants dcc = derive_constants(p, stc);
    REQUIRE_THROWS_AS(sojourn_ruin_asymptotic(p, joint, dcc, stc, u, in),
                      HypothesisViolation);
  }
}

TEST_CASE("window-limit degeneration is continuous at T = 0") {
  // With constants held fixed, sending the scaled window limit to zero
  // changes the evaluator output continuously.
  const ModelParams p = validate_params(1, 0.5, 1, 1.1, 0.5);
  const Regime r = classify_regime(critical_points(p));
  // The window-factor derivative diverges like 1/sqrt(T) at 0, so the
  // perturbation must be deep enough for a 1e-10 match.
  const double eps = 1e-18;
  const DerivedConstants dc0 =
      derive_constants(p, make_threshold(ThresholdMode::constant, 0.0));
  const DerivedConstants dce =
      derive_constants(p, make_threshold(ThresholdMode::constant, eps));
  const double v0 =
      sojourn_ruin_asymptotic(p, r, dc0, make_threshold(ThresholdMode::constant, 0.0), 2.0)
          .value;
  const double ve =
      sojourn_ruin_asymptotic(p, r, dce, make_threshold(ThresholdMode::constant, eps), 2.0)
          .value;
  REQUIRE(std::abs(v0 - ve) <= 1e-10);

  // Same for the joint branch at H=1/2 with an injected constant.
  const Regime joint{RegimeKind::joint, 0};
  ConstantInputs in;
  in.two_sided = 0.5;
  const DerivedConstants dj0 =
      derive_constants(kP0(), make_threshold(ThresholdMode::constant, 0.0));
  const DerivedConstants dje =
      derive_constants(kP0(), make_threshold(ThresholdMode::constant, eps));
  const double w0 = sojourn_ruin_asymptotic(
                        kP0(), joint, dj0, make_threshold(ThresholdMode::constant, 0.0),
                        4.0, in)
                        .value;
  const double we = sojourn_ruin_asymptotic(
                        kP0(), joint, dje, make_threshold(ThresholdMode::constant, eps),
                        4.0, in)
                        .value;
  REQUIRE(std::abs(w0 - we) <= 1e-10);
}

TEST_CASE("constant-window bounds for small Hurst") {
  // Parameters engineered so t_star = 1, eta = 3, peak ratio 3 at H = 1/4.
  const ModelParams p = validate_params(2, 0.5, 1, 2.5, 0.25);
  const SojournThreshold st = make_threshold(ThresholdMode::constant, 1.0);
  const DerivedConstants dc = derive_constants(p, st);
  REQUIRE_THAT(dc.d_h, Catch::Matchers::WithinRel(3.0, 1e-14));
  REQUIRE_THAT(*dc.alpha, Catch::Matchers::WithinRel(0.5, 1e-14));
  REQUIRE_THAT(*dc.c1_alpha, Catch::Matchers::WithinRel(4.5, 1e-14));
  REQUIRE_THAT(*dc.c2_alpha, Catch::Matchers::WithinRel(1.125, 1e-14));

  const double u = 3.0;
  const BoundsPair b = constant_threshold_bounds(p, dc, 1.0, u, 0.9);
  const double arg = 3.0 * std::pow(u, 0.75);
  const double expected_lower =
      log_normal_survival(arg) - 4.5 * u - 1.125 * std::sqrt(u);
  REQUIRE_THAT(b.lower_envelope, Catch::Matchers::WithinRel(expected_lower, 1e-12));
  const double upper_arg = std::pow(u, 0.5) * 3.0 / 2.0;
  REQUIRE_THAT(b.upper, Catch::Matchers::WithinRel(
                            std::log(2.0) + log_normal_survival(arg) +
                                log_normal_survival(upper_arg),
                            1e-12));

  // Envelope ordering for u >= 2 across random draws.
  auto rng = Xoshiro256pp::for_stream(5, 0);
  int checked = 0;
  while (checked < 200) {
    const double c2 = 0.2 + rng.next_unit();
    const double c1 = c2 + 0.2 + rng.next_unit();
    const double q1 = 0.2 + rng.next_unit();
    const double q2 = q1 + 0.2 + rng.next_unit();
    const double h = 0.05 + 0.4 * rng.next_unit();
    ModelParams pp{c1, c2, q1, q2, h};
    if (classify_regime(critical_points(pp)).kind != RegimeKind::joint) continue;
    const double t0 = 0.1 + 2.0 * rng.next_unit();
    const double cbar = 0.05 + 0.85 * rng.next_unit();
    const SojournThreshold stc = make_threshold(ThresholdMode::constant, t0);
    const DerivedConstants dcc = derive_constants(pp, stc);
    for (double uu : {2.0, 4.0, 8.0, 32.0}) {
      const BoundsPair bb = constant_threshold_bounds(pp, dcc, t0, uu, cbar);
      REQUIRE(bb.lower_envelope + std::log(cbar) < bb.upper);
    }
    ++checked;
  }

  // Upper bound is continuous as the window vanishes.
  const BoundsPair b0 = constant_threshold_bounds(p, dc, 1e-300, u, 1.0);
  REQUIRE_THAT(b0.upper, Catch::Matchers::WithinAbs(log_normal_survival(arg), 1e-10));

  // Preconditions.
  REQUIRE_THROWS_AS(constant_threshold_bounds(kP0(), dc, 1.0, u, 1.0), RegimeError);
  REQUIRE_THROWS_AS(constant_threshold_bounds(p, dc, 0.0, u, 1.0), RegimeError);
  // t_star > t2 at this Hurst: single-line regime, bounds do not apply.
  const ModelParams psingle = validate_params(2, 1, 1, 2, 0.25);
  REQUIRE(classify_regime(critical_points(psingle)).kind == RegimeKind::single_line);
  const DerivedConstants dcs = derive_constants(psingle, st);
  REQUIRE_THROWS_AS(constant_threshold_bounds(psingle, dcs, 1.0, u, 1.0), RegimeError);
}
