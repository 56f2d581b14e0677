#pragma once

// Experiment orchestration: regime reports, exact-vs-MC validation tables
// and asymptotic-convergence tables, all re-derivable from (seed, config).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sojourn/analytic.hpp"
#include "sojourn/config.hpp"
#include "sojourn/constants_mc.hpp"
#include "sojourn/mc.hpp"
#include "sojourn/model.hpp"

namespace sojourn {

inline std::string format_g(double v, int prec = 12) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
  return buf;
}

// Constants report keyed by symbol-style names.
inline nlohmann::json constants_to_json(const DerivedConstants& dc) {
  nlohmann::json j;
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
    else j[key] = nullptr;
  };
  j["d_h"] = dc.d_h;
  j["k_h"] = dc.k_h;
  j["c_1"] = dc.c_line[0];
  j["c_2_const"] = dc.c_line[1];
  j["d_1"] = dc.d_line[0];
  j["d_2"] = dc.d_line[1];
  j["eta"] = dc.eta;
  j["t_prime"] = dc.t_prime;
  put("a", dc.a);
  put("d_bar", dc.d_bar);
  put("alpha", dc.alpha);
  put("c1_alpha", dc.c1_alpha);
  put("c2_alpha", dc.c2_alpha);
  return j;
}

inline nlohmann::json run_classify(const ExperimentConfig& cfg) {
  const ModelParams p = validate_params(cfg.model.c1, cfg.model.c2, cfg.model.q1,
                                        cfg.model.q2, cfg.model.hurst);
  const CriticalPoints cp = critical_points(p);
  const Regime regime = classify_regime(cp);
  const DerivedConstants dc = derive_constants(p, cfg.sojourn);
  nlohmann::json j;
  j["model"] = {{"c1", p.c1}, {"c2", p.c2}, {"q1", p.q1}, {"q2", p.q2},
                {"hurst", p.hurst}};
  j["sojourn"] = {{"mode", cfg.sojourn.mode == ThresholdMode::constant ? "constant"
                                                                       : "scaled"},
                  {"value", cfg.sojourn.value}};
  j["critical_points"] = {{"t_star", cp.t_star}, {"t1", cp.t1}, {"t2", cp.t2}};
  j["regime"] = regime_name(regime);
  const std::optional<double> t_lim = sojourn_limit(cfg.sojourn, p.hurst);
  if (t_lim) j["sojourn_window_limit"] = *t_lim;
  else j["sojourn_window_limit"] = "nonconforming";
  j["constants"] = constants_to_json(dc);
  return j;
}

inline nlohmann::json asymptotic_to_json(const AsymptoticValue& av) {
  nlohmann::json j;
  j["branch"] = av.branch;
  j["value"] = av.value;
  j["log_value"] = av.log_value;
  nlohmann::json inputs;
  if (av.berman_input) inputs["berman"] = *av.berman_input;
  if (av.two_sided_input) inputs["two_sided"] = *av.two_sided_input;
  j["inputs"] = inputs;
  return j;
}

// Resolve the injected/estimated constants a branch needs. Returns the
// inputs plus a note describing their provenance.
inline ConstantInputs resolve_constants(const ExperimentConfig& cfg,
                                        const ModelParams& p, const Regime& regime,
                                        const DerivedConstants& dc,
                                        std::string* provenance = nullptr) {
  ConstantInputs inputs;
  inputs.berman = cfg.constants.berman;
  inputs.two_sided = cfg.constants.piterbarg;
  std::string note;
  const std::optional<double> t_lim = sojourn_limit(cfg.sojourn, p.hurst);
  const double T = t_lim.value_or(0.0);
  const bool joint = regime.kind == RegimeKind::joint;
  const bool needs_berman =
      (!joint && p.hurst != 0.5) || (joint && p.hurst < 0.5);
  const bool needs_two_sided = joint && p.hurst == 0.5;
  if (needs_berman && !inputs.berman) {
    if (cfg.constants.estimate) {
      const int line = joint ? 0 : regime.line - 1;
      const double arg = joint ? (dc.d_bar ? *dc.d_bar * T : 0.0)
                               : T * dc.d_line[line];
      const GridSpec g = grid_for_horizon(cfg.constants.dt, cfg.constants.span);
      const ConstantEstimate ce = estimate_berman_constant(
          p.hurst, arg, cfg.constants.span, g, cfg.constants.n_paths,
          cfg.constants.z_lo, cfg.constants.z_hi, cfg.constants.seed);
      inputs.berman = ce.value;
      note += "berman estimated (stderr " + format_g(ce.stderr_, 3) + "); ";
    }
  } else if (inputs.berman) {
    note += "berman injected; ";
  }
  if (needs_two_sided && !inputs.two_sided) {
    if (cfg.constants.estimate) {
      const GridSpec g = grid_for_horizon(cfg.constants.dt, cfg.constants.span);
      const ConstantEstimate ce = estimate_piterbarg_sojourn(
          dc, dc.t_prime, cfg.constants.span, g, cfg.constants.n_paths,
          cfg.constants.x_lo, cfg.constants.x_hi, cfg.constants.seed);
      inputs.two_sided = ce.value;
      note += "two-sided estimated (stderr " + format_g(ce.stderr_, 3) + "); ";
    }
  } else if (inputs.two_sided) {
    note += "two-sided injected; ";
  }
  if (provenance) *provenance = note;
  return inputs;
}

struct ConvergenceRow {
  double u = 0.0;
  MCEstimate mc;
  double asym_value = std::numeric_limits<double>::quiet_NaN();
  double asym_log = std::numeric_limits<double>::quiet_NaN();
  double ratio = std::numeric_limits<double>::quiet_NaN();
  Interval ratio_ci{std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::quiet_NaN()};
  bool insufficient = false;  // fewer than 20 hits: excluded from the fit
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  // Decay-rate fit: slope of (log p_hat - subexponential prefactor) against
  // u^(2-2H). The prefactor removal isolates the exponent, which is free of
  // the estimated constants.
  double fit_slope = std::numeric_limits<double>::quiet_NaN();
  double fit_slope_stderr = std::numeric_limits<double>::quiet_NaN();
  double target_rate = std::numeric_limits<double>::quiet_NaN();
  std::size_t fit_rows = 0;
  std::string constants_note;
};

// Subexponential part of the asymptote's log (everything except the
// leading Gaussian exponent and the constant factors).
inline double log_subexponential_prefactor(const ModelParams& p, const Regime& regime,
                                           const DerivedConstants& dc, double u) {
  const double h = p.hurst;
  if (regime.kind != RegimeKind::joint) {
    if (h == 0.5) return 0.0;  // pure exponential branch
    const double K = dc.c_line[regime.line - 1];
    const double arg = K * std::pow(u, 1.0 - h);
    return log_normal_survival(arg) + 0.5 * arg * arg +
           (1.0 / h - 1.0) * std::log(arg);
  }
  const double K = dc.d_h;
  const double arg = K * std::pow(u, 1.0 - h);
  double v = log_normal_survival(arg) + 0.5 * arg * arg;
  if (h < 0.5) v += (1.0 - h) * (1.0 / h - 2.0) * std::log(u);
  return v;
}

inline double leading_rate(const Regime& regime, const DerivedConstants& dc) {
  const double K =
      regime.kind == RegimeKind::joint ? dc.d_h : dc.c_line[regime.line - 1];
  return -0.5 * K * K;
}

inline ConvergenceResult run_convergence(const ExperimentConfig& cfg) {
  const ModelParams p = validate_params(cfg.model.c1, cfg.model.c2, cfg.model.q1,
                                        cfg.model.q2, cfg.model.hurst);
  const CriticalPoints cp = critical_points(p);
  const Regime regime = classify_regime(cp);
  const DerivedConstants dc = derive_constants(p, cfg.sojourn);

  ConvergenceResult out;
  ConstantInputs inputs = resolve_constants(cfg, p, regime, dc, &out.constants_note);

  RunOptions opts;
  opts.threads = cfg.sim.threads;
  opts.chunk_size = cfg.sim.chunk_size;
  opts.pilot_fraction = cfg.sim.pilot_fraction;

  std::vector<double> xs, ys;
  for (double u : cfg.u_grid) {
    ConvergenceRow row;
    row.u = u;
    const double horizon =
        cfg.sim.horizon > 0.0 ? cfg.sim.horizon : default_two_dim_horizon(p, u);
    const GridSpec grid = grid_for_horizon(cfg.sim.dt, horizon);
    if (cfg.sim.theta || cfg.sim.theta_auto) {
      std::optional<double> theta = cfg.sim.theta;
      row.mc = estimate_two_dim_sojourn_tilted(p, u, cfg.sojourn, grid,
                                               cfg.sim.n_paths, cfg.sim.seed, theta,
                                               opts);
    } else {
      row.mc = estimate_two_dim_sojourn(p, u, cfg.sojourn, grid, cfg.sim.n_paths,
                                        cfg.sim.seed, opts);
    }
    try {
      const AsymptoticValue av = sojourn_ruin_asymptotic(p, regime, dc, cfg.sojourn, u, inputs);
      row.asym_value = av.value;
      row.asym_log = av.log_value;
      if (av.value > 0.0) {
        row.ratio = row.mc.p_hat / av.value;
        row.ratio_ci = {row.mc.ci95.lo / av.value, row.mc.ci95.hi / av.value};
      }
    } catch (const MissingConstant&) {
      // Ratio columns stay NaN; the rate fit below is constant-free.
    }
    row.insufficient = row.mc.n_hits < 20;
    if (!row.insufficient && row.mc.p_hat > 0.0) {
      xs.push_back(std::pow(u, 2.0 - 2.0 * p.hurst));
      ys.push_back(std::log(row.mc.p_hat) -
                   log_subexponential_prefactor(p, regime, dc, u));
    }
    out.rows.push_back(row);
  }
  out.target_rate = leading_rate(regime, dc);
  if (xs.size() >= 2) {
    const LinearFit fit = linear_fit(xs, ys);
    out.fit_slope = fit.slope;
    out.fit_slope_stderr = fit.slope_stderr;
    out.fit_rows = fit.n;
  }
  return out;
}

inline std::string mc_csv_header() {
  return "u,t_u,p_hat,stderr,ci_lo,ci_hi,n_paths,dt,horizon,"
         "horizon_doubling_delta,seed";
}

inline std::string mc_csv_row(const MCEstimate& e) {
  std::ostringstream os;
  os << format_g(e.u) << ',' << format_g(e.t_u) << ',' << format_g(e.p_hat) << ','
     << format_g(e.stderr_) << ',' << format_g(e.ci95.lo) << ','
     << format_g(e.ci95.hi) << ',' << e.n_paths << ',' << format_g(e.grid.dt) << ','
     << format_g(e.grid.horizon()) << ',' << format_g(e.horizon_doubling_delta)
     << ',' << e.seed;
  return os.str();
}

inline std::string convergence_csv(const ConvergenceResult& res) {
  std::ostringstream os;
  os << mc_csv_header()
     << ",n_hits,insufficient,asym_value,asym_log,ratio,ratio_lo,ratio_hi\n";
  for (const auto& row : res.rows) {
    os << mc_csv_row(row.mc) << ',' << row.mc.n_hits << ','
       << (row.insufficient ? 1 : 0) << ',' << format_g(row.asym_value) << ','
       << format_g(row.asym_log) << ',' << format_g(row.ratio) << ','
       << format_g(row.ratio_ci.lo) << ',' << format_g(row.ratio_ci.hi) << '\n';
  }
  return os.str();
}

inline nlohmann::json convergence_fit_json(const ConvergenceResult& res) {
  nlohmann::json j;
  j["fit_slope"] = res.fit_slope;
  j["fit_slope_stderr"] = res.fit_slope_stderr;
  j["target_rate"] = res.target_rate;
  j["fit_rows"] = res.fit_rows;
  j["relative_error"] = std::abs(res.fit_slope - res.target_rate) /
                        std::abs(res.target_rate);
  if (!res.constants_note.empty()) j["constants"] = res.constants_note;
  return j;
}

struct ValidateCell {
  double u = 0.0;
  double t_u = 0.0;
  double exact = 0.0;
  MCEstimate coarse;
  MCEstimate fine;
  double richardson = 0.0;
  double richardson_stderr = 0.0;
  double z_score = 0.0;
  bool pass = false;
};

struct ValidateResult {
  std::vector<ValidateCell> cells;
  bool all_pass = true;
};

// One-line exact-vs-MC validation at Hurst 1/2: estimates at dt and 2*dt,
// then a sqrt(dt) Richardson combination against the exact closed form.
inline ValidateResult run_validate_exact(const ExperimentConfig& cfg) {
  const ModelParams p = validate_params(cfg.model.c1, cfg.model.c2, cfg.model.q1,
                                        cfg.model.q2, cfg.model.hurst);
  if (p.hurst != 0.5) {
    throw RegimeError("validate-exact: requires hurst = 1/2");
  }
  RunOptions opts;
  opts.threads = cfg.sim.threads;
  opts.chunk_size = cfg.sim.chunk_size;
  opts.pilot_fraction = cfg.sim.pilot_fraction;
  const double root2 = std::sqrt(2.0);

  ValidateResult out;
  for (double u : cfg.u_grid) {
    ValidateCell cell;
    cell.u = u;
    cell.t_u = threshold_at(cfg.sojourn, 0.5, u);
    cell.exact = bm_sojourn_exact(p.c1, p.q1 * u, cell.t_u);
    const double horizon =
        cfg.sim.horizon > 0.0 ? cfg.sim.horizon : default_two_dim_horizon(p, u);
    const GridSpec fine = grid_for_horizon(cfg.sim.dt, horizon);
    const GridSpec coarse = grid_for_horizon(2.0 * cfg.sim.dt, horizon);
    cell.fine = estimate_one_dim_sojourn(p.c1, p.q1, 0.5, u, cfg.sojourn, fine,
                                         cfg.sim.n_paths, cfg.sim.seed, opts);
    cell.coarse = estimate_one_dim_sojourn(p.c1, p.q1, 0.5, u, cfg.sojourn, coarse,
                                           cfg.sim.n_paths, cfg.sim.seed + 1, opts);
    cell.richardson =
        (root2 * cell.fine.p_hat - cell.coarse.p_hat) / (root2 - 1.0);
    cell.richardson_stderr =
        std::sqrt(2.0 * cell.fine.stderr_ * cell.fine.stderr_ +
                  cell.coarse.stderr_ * cell.coarse.stderr_) /
        (root2 - 1.0);
    cell.z_score = (cell.richardson - cell.exact) / cell.richardson_stderr;
    cell.pass = std::abs(cell.richardson - cell.exact) <=
                3.0 * cell.richardson_stderr;
    out.all_pass = out.all_pass && cell.pass;
    out.cells.push_back(cell);
  }
  return out;
}

inline std::string validate_csv(const ValidateResult& res) {
  std::ostringstream os;
  os << "u,t_u,exact,p_coarse,se_coarse,p_fine,se_fine,richardson,"
        "se_richardson,z_score,pass\n";
  for (const auto& c : res.cells) {
    os << format_g(c.u) << ',' << format_g(c.t_u) << ',' << format_g(c.exact) << ','
       << format_g(c.coarse.p_hat) << ',' << format_g(c.coarse.stderr_) << ','
       << format_g(c.fine.p_hat) << ',' << format_g(c.fine.stderr_) << ','
       << format_g(c.richardson) << ',' << format_g(c.richardson_stderr) << ','
       << format_g(c.z_score) << ',' << (c.pass ? 1 : 0) << '\n';
  }
  return os.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
}

}  // namespace sojourn
