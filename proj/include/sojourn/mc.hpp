#pragma once

// Monte-Carlo estimators of one- and two-line sojourn ruin probabilities.
// Every estimate is a pure fold over per-path results keyed by
// (seed, path index), reduced in fixed chunk order: bitwise reproducible
// under any thread count.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "sojourn/analytic.hpp"
#include "sojourn/fgn.hpp"
#include "sojourn/model.hpp"
#include "sojourn/parallel.hpp"
#include "sojourn/rng.hpp"
#include "sojourn/stats.hpp"

namespace sojourn {

struct RunOptions {
  unsigned threads = 0;        // 0 = RUN_THREADS env or hardware concurrency
  std::size_t chunk_size = 8192;
  double pilot_fraction = 0.1;  // share of n_paths used for the horizon probe
  bool horizon_probe = true;
};

struct MCEstimate {
  double p_hat = 0.0;
  double stderr_ = 0.0;
  std::size_t n_paths = 0;
  std::size_t n_hits = 0;
  Interval ci95{};  // Wilson interval instead of normal when n_hits < 50
  GridSpec grid{};
  double u = 0.0;
  double t_u = 0.0;  // window actually applied at this u
  double horizon_doubling_delta = 0.0;
  std::uint64_t seed = 0;
  double theta = 0.0;  // drift tilt; 0 means plain sampling
};

// Grid occupation time of the two-line exceedance set, left-endpoint sum
// over k >= 1.
inline double sojourn_time_two_dim(const FbmPath& path, const ModelParams& p,
                                   double u) {
  std::size_t count = 0;
  for (std::size_t k = 1; k < path.values.size(); ++k) {
    const double t = static_cast<double>(k) * path.grid.dt;
    const double x = path.values[k];
    if (x - p.c1 * t > p.q1 * u && x - p.c2 * t > p.q2 * u) ++count;
  }
  return path.grid.dt * static_cast<double>(count);
}

inline double sojourn_time_one_dim(const FbmPath& path, double c, double q,
                                   double u) {
  std::size_t count = 0;
  for (std::size_t k = 1; k < path.values.size(); ++k) {
    const double t = static_cast<double>(k) * path.grid.dt;
    if (path.values[k] - c * t > q * u) ++count;
  }
  return path.grid.dt * static_cast<double>(count);
}

// Default simulation horizon: the variance maxima of the rescaled field
// sit at t_star, t1, t2, so ruin mass concentrates near their images at
// capital u; three times the largest covers the tails.
inline double default_two_dim_horizon(const ModelParams& p, double u) {
  const CriticalPoints cp = critical_points(p);
  return 3.0 * std::max({cp.t_star, cp.t1, cp.t2}) * u;
}

// Default exponential tilt: the slope of the straight line to the corner
// point (u t_star, eta u), which centers hits at the barrier.
inline double default_tilt(const ModelParams& p) {
  const CriticalPoints cp = critical_points(p);
  return (p.c1 * cp.t_star + p.q1) / cp.t_star;
}

namespace detail {

struct LinePair {
  double c1, q1;
  double c2, q2;
  bool two_lines;
};

struct ChunkSums {
  double sum_w = 0.0;
  double sum_w2 = 0.0;
  std::size_t hits = 0;
  std::size_t paths = 0;
  // horizon probe counters (windowed at h and 2h on shared increments)
  double probe_w_h = 0.0;
  double probe_w_2h = 0.0;
  std::size_t probe_paths = 0;
};

// Brownian streaming path: one normal per step, optional drift tilt that
// switches off at the first entry into the exceedance region (the
// likelihood ratio freezes there, which keeps its variance bounded).
template <bool kProbe>
inline void stream_brownian_path(Xoshiro256pp& rng, const ZigguratNormal& zig,
                                 const LinePair& lines, double u, double t_window,
                                 const GridSpec& grid, double theta,
                                 ChunkSums& acc) {
  const std::size_t n_steps = kProbe ? 2 * grid.n_steps : grid.n_steps;
  const double dt = grid.dt;
  const double sqrt_dt = std::sqrt(dt);
  const double theta_dt = theta * dt;
  double x = 0.0;
  double bar1 = lines.q1 * u;
  double bar2 = lines.q2 * u;
  const double db1 = lines.c1 * dt;
  const double db2 = lines.c2 * dt;
  bool tilting = theta != 0.0;
  double log_w = 0.0;
  double sojourn = 0.0;
  bool hit_h = false, hit_2h = false;
  for (std::size_t k = 1; k <= n_steps; ++k) {
    x += sqrt_dt * zig(rng);
    if (tilting) x += theta_dt;
    bar1 += db1;
    bar2 += db2;
    const bool above = x > bar1 && (!lines.two_lines || x > bar2);
    if (above) {
      if (tilting) {
        // Likelihood ratio of the drift-free law against the tilted
        // proposal, stopped at first entry: the per-step density ratios
        // telescope to exp(-theta x + theta^2 t / 2) with x the simulated
        // path value.
        const double t_now = static_cast<double>(k) * dt;
        log_w = -theta * x + 0.5 * theta * theta * t_now;
        tilting = false;
      }
      sojourn += dt;
      if (sojourn > t_window) {
        if (!kProbe) {
          hit_h = true;
          break;
        }
        if (k <= grid.n_steps) hit_h = true;
        hit_2h = true;
        break;
      }
    }
  }
  const double w = (hit_h || hit_2h) ? std::exp(log_w) : 0.0;
  if (kProbe) {
    acc.probe_w_h += hit_h ? w : 0.0;
    acc.probe_w_2h += hit_2h ? w : 0.0;
    acc.probe_paths += 1;
  } else {
    if (hit_h) {
      acc.sum_w += w;
      acc.sum_w2 += w * w;
      acc.hits += 1;
    }
    acc.paths += 1;
  }
}

// Fractional path route: sample exact increments, scan the cumulative sum.
// `keep` is 1 or 2 (an odd total uses only the first draw of the last pair).
template <bool kProbe>
inline void scan_fgn_pair(const FgnSampler& sampler, Xoshiro256pp& rng,
                          const LinePair& lines, double u, double t_window,
                          std::size_t n_base_steps, std::vector<double>& buf1,
                          std::vector<double>& buf2, int keep, ChunkSums& acc) {
  const GridSpec& g = sampler.grid();
  sampler.sample_pair(rng, buf1, buf2);
  const std::vector<double>* bufs[2] = {&buf1, &buf2};
  for (int which = 0; which < keep; ++which) {
    const std::vector<double>& inc = *bufs[which];
    double x = 0.0;
    double bar1 = lines.q1 * u;
    double bar2 = lines.q2 * u;
    const double db1 = lines.c1 * g.dt;
    const double db2 = lines.c2 * g.dt;
    double sojourn = 0.0;
    bool hit_h = false, hit_2h = false;
    for (std::size_t k = 1; k <= g.n_steps; ++k) {
      x += inc[k - 1];
      bar1 += db1;
      bar2 += db2;
      if (x > bar1 && (!lines.two_lines || x > bar2)) {
        sojourn += g.dt;
        if (sojourn > t_window) {
          if (!kProbe) {
            hit_h = true;
            break;
          }
          if (k <= n_base_steps) hit_h = true;
          hit_2h = true;
          break;
        }
      }
    }
    if (kProbe) {
      acc.probe_w_h += hit_h ? 1.0 : 0.0;
      acc.probe_w_2h += hit_2h ? 1.0 : 0.0;
      acc.probe_paths += 1;
    } else {
      if (hit_h) {
        acc.sum_w += 1.0;
        acc.sum_w2 += 1.0;
        acc.hits += 1;
      }
      acc.paths += 1;
    }
  }
}

inline MCEstimate run_sojourn_mc(const LinePair& lines, double hurst, double u,
                                 const SojournThreshold& st, const GridSpec& grid,
                                 std::size_t n_paths, std::uint64_t seed,
                                 double theta, const RunOptions& opts) {
  if (n_paths == 0) throw RangeViolation("mc: n_paths must be >= 1");
  if (theta != 0.0 && hurst != 0.5) {
    throw RegimeError("mc: drift tilting requires hurst = 1/2 exactly");
  }
  const double t_window = threshold_at(st, hurst, u);
  const bool brownian = hurst == 0.5;
  const ZigguratNormal zig;

  const std::size_t per_chunk = std::max<std::size_t>(1, opts.chunk_size);
  // The fractional route draws two paths per stream; chunk over pairs there.
  const std::size_t n_units = brownian ? n_paths : (n_paths + 1) / 2;
  const std::size_t n_chunks = (n_units + per_chunk - 1) / per_chunk;
  std::vector<ChunkSums> partial(n_chunks);

  std::optional<FgnSampler> sampler;
  if (!brownian) sampler.emplace(hurst, grid);

  parallel_chunks(n_chunks, opts.threads, [&](std::size_t chunk) {
    ChunkSums acc;
    const std::size_t lo = chunk * per_chunk;
    const std::size_t hi = std::min(n_units, lo + per_chunk);
    if (brownian) {
      for (std::size_t path = lo; path < hi; ++path) {
        auto rng = Xoshiro256pp::for_stream(seed, path);
        stream_brownian_path<false>(rng, zig, lines, u, t_window, grid, theta, acc);
      }
    } else {
      std::vector<double> buf1(grid.n_steps), buf2(grid.n_steps);
      for (std::size_t pair = lo; pair < hi; ++pair) {
        auto rng = Xoshiro256pp::for_stream(seed, pair);
        const int keep = (2 * pair + 2 <= n_paths) ? 2 : 1;
        scan_fgn_pair<false>(*sampler, rng, lines, u, t_window, grid.n_steps, buf1,
                             buf2, keep, acc);
      }
    }
    partial[chunk] = acc;
  });

  ChunkSums total;
  for (const ChunkSums& c : partial) {
    total.sum_w += c.sum_w;
    total.sum_w2 += c.sum_w2;
    total.hits += c.hits;
    total.paths += c.paths;
  }

  MCEstimate est;
  est.n_paths = n_paths;
  est.n_hits = total.hits;
  est.grid = grid;
  est.u = u;
  est.t_u = t_window;
  est.seed = seed;
  est.theta = theta;
  const double n = static_cast<double>(n_paths);
  est.p_hat = total.sum_w / n;
  const double var =
      n > 1 ? std::max(0.0, (total.sum_w2 - n * est.p_hat * est.p_hat) / (n - 1.0))
            : 0.0;
  est.stderr_ = std::sqrt(var / n);
  if (total.hits < 50 && theta == 0.0) {
    est.ci95 = wilson_interval(total.hits, n_paths);
  } else {
    est.ci95 = {est.p_hat - 1.96 * est.stderr_, est.p_hat + 1.96 * est.stderr_};
  }

  if (opts.horizon_probe && opts.pilot_fraction > 0.0) {
    const std::size_t n_pilot = std::max<std::size_t>(
        1, static_cast<std::size_t>(static_cast<double>(n_paths) * opts.pilot_fraction));
    const std::size_t pilot_units = brownian ? n_pilot : (n_pilot + 1) / 2;
    const std::size_t pilot_chunks = (pilot_units + per_chunk - 1) / per_chunk;
    std::vector<ChunkSums> pilot_partial(pilot_chunks);
    std::optional<FgnSampler> pilot_sampler;
    if (!brownian) pilot_sampler.emplace(hurst, make_grid(grid.dt, 2 * grid.n_steps));
    constexpr std::uint64_t kPilotBit = std::uint64_t{1} << 62;
    parallel_chunks(pilot_chunks, opts.threads, [&](std::size_t chunk) {
      ChunkSums acc;
      const std::size_t lo = chunk * per_chunk;
      const std::size_t hi = std::min(pilot_units, lo + per_chunk);
      if (brownian) {
        for (std::size_t path = lo; path < hi; ++path) {
          auto rng = Xoshiro256pp::for_stream(seed, kPilotBit | path);
          stream_brownian_path<true>(rng, zig, lines, u, t_window, grid, theta, acc);
        }
      } else {
        std::vector<double> buf1(2 * grid.n_steps), buf2(2 * grid.n_steps);
        for (std::size_t pair = lo; pair < hi; ++pair) {
          auto rng = Xoshiro256pp::for_stream(seed, kPilotBit | pair);
          const int keep = (2 * pair + 2 <= n_pilot) ? 2 : 1;
          scan_fgn_pair<true>(*pilot_sampler, rng, lines, u, t_window, grid.n_steps,
                              buf1, buf2, keep, acc);
        }
      }
      pilot_partial[chunk] = acc;
    });
    ChunkSums pilot;
    for (const ChunkSums& c : pilot_partial) {
      pilot.probe_w_h += c.probe_w_h;
      pilot.probe_w_2h += c.probe_w_2h;
      pilot.probe_paths += c.probe_paths;
    }
    if (pilot.probe_paths > 0) {
      est.horizon_doubling_delta =
          (pilot.probe_w_2h - pilot.probe_w_h) / static_cast<double>(pilot.probe_paths);
    }
  }
  return est;
}

}  // namespace detail

inline MCEstimate estimate_two_dim_sojourn(const ModelParams& p, double u,
                                           const SojournThreshold& st,
                                           const GridSpec& grid, std::size_t n_paths,
                                           std::uint64_t seed,
                                           const RunOptions& opts = {}) {
  return detail::run_sojourn_mc({p.c1, p.q1, p.c2, p.q2, true}, p.hurst, u, st, grid,
                                n_paths, seed, 0.0, opts);
}

inline MCEstimate estimate_one_dim_sojourn(double c, double q, double hurst, double u,
                                           const SojournThreshold& st,
                                           const GridSpec& grid, std::size_t n_paths,
                                           std::uint64_t seed,
                                           const RunOptions& opts = {}) {
  return detail::run_sojourn_mc({c, q, 0.0, 0.0, false}, hurst, u, st, grid, n_paths,
                                seed, 0.0, opts);
}

// Drift-tilted Brownian estimator (hurst = 1/2 only). Unbiased: paths are
// sampled with drift theta*t until the exceedance region is first entered,
// the likelihood ratio exp(-theta X_tau + theta^2 tau / 2) freezes at that
// entry (X the sampled path), and hits are reweighted by it. Freezing at
// the entry keeps the log-weight spread bounded; a horizon-long tilt would
// inflate the relative second moment by exp(theta^2 * horizon).
inline MCEstimate estimate_two_dim_sojourn_tilted(
    const ModelParams& p, double u, const SojournThreshold& st, const GridSpec& grid,
    std::size_t n_paths, std::uint64_t seed,
    std::optional<double> theta = std::nullopt, const RunOptions& opts = {}) {
  if (p.hurst != 0.5) throw RegimeError("tilted estimator requires hurst = 1/2");
  const double th = theta ? *theta : default_tilt(p);
  return detail::run_sojourn_mc({p.c1, p.q1, p.c2, p.q2, true}, 0.5, u, st, grid,
                                n_paths, seed, th, opts);
}

inline MCEstimate estimate_one_dim_sojourn_tilted(
    double c, double q, double u, const SojournThreshold& st, const GridSpec& grid,
    std::size_t n_paths, std::uint64_t seed, double theta,
    const RunOptions& opts = {}) {
  return detail::run_sojourn_mc({c, q, 0.0, 0.0, false}, 0.5, u, st, grid, n_paths,
                                seed, theta, opts);
}

}  // namespace sojourn
