#pragma once

// Path simulation of stationary impulse strategies. Estimates the long-run functionals
//   J   = (1/T) E[ int_0^T g(Y_s) ds + sum_{tau_i <= T} c ]
//   J^d = E[ int_0^T beta(s) g(Y_s) ds + sum_{tau_i <= T} beta(tau_i) c ] / int_0^T beta
// at checkpoints T = n h. Impulses happen only at multiples of h.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "impulse/bellman.hpp"
#include "impulse/discounting.hpp"
#include "impulse/errors.hpp"
#include "impulse/linalg.hpp"
#include "impulse/model.hpp"

namespace impulse {

struct SimConfig {
  std::size_t n_paths = 10'000;
  std::size_t horizon_steps = 10'000;       // coarse steps of length h
  std::uint64_t seed = 20240601;
  std::vector<std::size_t> checkpoints;     // coarse step counts; empty = 16 evenly spaced
  std::size_t fine_factor = 1;              // sub-steps per h for the running integral
  std::size_t initial_state = 0;
  unsigned threads = 0;                     // 0 = hardware concurrency
};

struct CheckpointEstimate {
  std::size_t step = 0;
  double mean = 0.0;
  double std_error = 0.0;
};

struct FunctionalEstimate {
  double mean = 0.0;                             // at the last checkpoint
  double std_error = 0.0;
  std::vector<CheckpointEstimate> per_checkpoint;
  double tail_sup = 0.0;                         // max checkpoint mean over the last quarter
  std::vector<double> path_values;               // per-path value at the last checkpoint
};

/// SplitMix64 finalizer.
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Stream seed for one path; depends on (seed, path) only.
inline std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path) {
  return splitmix64(seed ^ splitmix64(path));
}

/// Checkpoints actually used: the configured list, or 16 evenly spaced steps ending at the horizon.
inline std::vector<std::size_t> resolve_checkpoints(const SimConfig& cfg) {
  if (cfg.horizon_steps == 0) throw DomainError("simulation horizon must be positive");
  if (cfg.n_paths == 0) throw DomainError("simulation needs at least one path");
  if (cfg.fine_factor == 0) throw DomainError("fine_factor must be >= 1");
  std::vector<std::size_t> cps = cfg.checkpoints;
  if (cps.empty()) {
    constexpr std::size_t kDefault = 16;
    for (std::size_t j = 1; j <= kDefault; ++j) {
      const std::size_t s = cfg.horizon_steps * j / kDefault;
      if (s > 0 && (cps.empty() || cps.back() != s)) cps.push_back(s);
    }
  }
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (cps[i] == 0 || cps[i] > cfg.horizon_steps) throw DomainError("checkpoint outside (0, horizon]");
    if (i > 0 && cps[i] <= cps[i - 1]) throw DomainError("checkpoints must be strictly increasing");
  }
  return cps;
}

namespace detail {

// Row-wise cumulative distribution; the last positive entry is pinned above 1 so a
// uniform in [0,1) always lands inside the support.
inline Matrix cumulative_rows(const Matrix& p) {
  Matrix cdf(p.rows(), p.cols());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t j = 0; j < p.cols(); ++j) {
      acc += p(i, j);
      cdf(i, j) = acc;
      if (p(i, j) > 0.0) last = j;
    }
    for (std::size_t j = last; j < p.cols(); ++j) cdf(i, j) = 2.0;
  }
  return cdf;
}

inline std::size_t sample_row(const Matrix& cdf, std::size_t row, double u) {
  const auto r = cdf.row(row);
  std::size_t j = 0;
  while (u >= r[j]) ++j;
  return j;
}

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct Weights {
  std::vector<double> running;  // integral of beta over each fine cell
  std::vector<double> impulse;  // beta at coarse grid time k h, k = 0..n
  std::vector<double> normalizer;  // integral of beta over [0, k h], k = 0..n
};

inline Weights make_weights(const DiscountSpec& beta, double h, std::size_t steps, std::size_t fine) {
  const double dt = h / static_cast<double>(fine);
  Weights w;
  const PhiSequence phi = compute_phi(beta, dt, steps * fine);
  w.running.resize(steps * fine);
  for (std::size_t j = 0; j < w.running.size(); ++j) w.running[j] = dt * phi[j];
  w.impulse.resize(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) w.impulse[k] = eval_beta(beta, static_cast<double>(k) * h);
  w.normalizer.assign(steps + 1, 0.0);
  for (std::size_t k = 0; k < steps; ++k)
    w.normalizer[k + 1] = w.normalizer[k] + pairwise_sum(std::span<const double>(w.running).subspan(k * fine, fine));
  return w;
}

inline CheckpointEstimate summarize(std::size_t step, std::span<const double> values) {
  const double count = static_cast<double>(values.size());
  const double mean = pairwise_sum(values) / count;
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - mean) * (values[i] - mean);
  const double var = values.size() > 1 ? pairwise_sum(sq) / (count - 1.0) : 0.0;
  return {step, mean, std::sqrt(var / count)};
}

inline FunctionalEstimate simulate(const StationaryStrategy& strategy, const ImpulseModel& model,
                                   const DiscountSpec& beta, const SimConfig& cfg) {
  const std::size_t n = model.size();
  if (strategy.size() != n) throw StrategyError("strategy size does not match the model");
  if (cfg.initial_state >= n) throw DomainError("initial state out of range");
  const std::vector<std::size_t> cps = resolve_checkpoints(cfg);
  const std::size_t fine = cfg.fine_factor;
  const double h = model.h();

  Matrix step_kernel = model.kernel().matrix;
  if (fine > 1) {
    if (!model.generator())
      throw DomainError("fine_factor > 1 needs a generator to build the sub-step kernel");
    step_kernel = kernel_from_generator(*model.generator(), h / static_cast<double>(fine)).matrix;
  }
  const Matrix cdf = cumulative_rows(step_kernel);
  const Weights weights = make_weights(beta, h, cfg.horizon_steps, fine);

  std::vector<double> impulse_cost(n, 0.0);
  std::vector<std::size_t> landing(n);
  std::vector<char> shifts(n, 0);
  std::vector<double> running(n);
  for (std::size_t x = 0; x < n; ++x) {
    landing[x] = x;
    running[x] = model.g(x);
    if (!strategy.continues(x)) {
      shifts[x] = 1;
      landing[x] = strategy.shift(x);
      impulse_cost[x] = model.shift_cost(x, landing[x]);
    }
  }

  const std::size_t n_cp = cps.size();
  // values[c * n_paths + p]
  std::vector<double> values(n_cp * cfg.n_paths);

  auto run_paths = [&](std::size_t begin, std::size_t end) {
    for (std::size_t path = begin; path < end; ++path) {
      std::mt19937_64 rng(path_seed(cfg.seed, path));
      std::size_t y = cfg.initial_state;
      double total = 0.0;
      if (shifts[y]) {
        total += weights.impulse[0] * impulse_cost[y];
        y = landing[y];
      }
      std::size_t next_cp = 0;
      for (std::size_t k = 0; k < cfg.horizon_steps; ++k) {
        for (std::size_t j = 0; j < fine; ++j) {
          total += weights.running[k * fine + j] * running[y];
          y = sample_row(cdf, y, uniform01(rng));
        }
        if (shifts[y]) {
          total += weights.impulse[k + 1] * impulse_cost[y];
          y = landing[y];
        }
        if (k + 1 == cps[next_cp]) {
          values[next_cp * cfg.n_paths + path] = total / weights.normalizer[k + 1];
          if (++next_cp == n_cp) break;
        }
      }
    }
  };

  unsigned threads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, cfg.n_paths));
  if (threads <= 1) {
    run_paths(0, cfg.n_paths);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (cfg.n_paths + threads - 1) / threads;
    for (std::size_t b = 0; b < cfg.n_paths; b += chunk)
      pool.emplace_back(run_paths, b, std::min(cfg.n_paths, b + chunk));
    for (auto& t : pool) t.join();
  }

  FunctionalEstimate est;
  for (std::size_t c = 0; c < n_cp; ++c)
    est.per_checkpoint.push_back(
        summarize(cps[c], std::span<const double>(values).subspan(c * cfg.n_paths, cfg.n_paths)));
  est.mean = est.per_checkpoint.back().mean;
  est.std_error = est.per_checkpoint.back().std_error;
  const std::size_t tail = std::max<std::size_t>(1, n_cp / 4);
  est.tail_sup = -std::numeric_limits<double>::infinity();
  for (std::size_t c = n_cp - tail; c < n_cp; ++c) est.tail_sup = std::max(est.tail_sup, est.per_checkpoint[c].mean);
  est.path_values.assign(values.end() - static_cast<std::ptrdiff_t>(cfg.n_paths), values.end());
  return est;
}

}  // namespace detail

/// Per-unit-time average cost on [0, n h] at each checkpoint.
inline FunctionalEstimate simulate_undiscounted(const StationaryStrategy& strategy, const ImpulseModel& model,
                                                const SimConfig& cfg) {
  return detail::simulate(strategy, model, DiscountSpec::constant(), cfg);
}

/// beta-weighted cost on [0, n h] normalized by the integral of beta.
/// With beta = 1 this reproduces simulate_undiscounted path for path.
inline FunctionalEstimate simulate_discounted(const StationaryStrategy& strategy, const ImpulseModel& model,
                                              const DiscountSpec& beta, const SimConfig& cfg) {
  return detail::simulate(strategy, model, beta, cfg);
}

struct EpsilonRow {
  double h = 0.0;
  double lambda = 0.0;
  StationaryStrategy strategy;
  FunctionalEstimate undiscounted;
  FunctionalEstimate discounted;
  double gap_undiscounted = 0.0;  // |estimate - lambda_h|
  double gap_discounted = 0.0;
};

struct EpsilonReport {
  std::vector<EpsilonRow> rows;
  /// Gaps may grow along the ladder only by sampling noise (3 combined standard errors).
  bool non_increasing_within_noise = true;
};

/// For each h: solve, extract the strategy and estimate both functionals over the same
/// physical horizon cfg.horizon_steps * h_ladder[0].
inline EpsilonReport epsilon_optimality_report(const ImpulseModel& model, const DiscountSpec& beta,
                                               const std::vector<double>& h_ladder, const SimConfig& cfg,
                                               const SolverOptions& opts = {}, double tie_tol = 1e-9) {
  if (h_ladder.empty()) throw DomainError("h ladder is empty");
  for (std::size_t i = 1; i < h_ladder.size(); ++i)
    if (!(h_ladder[i] < h_ladder[i - 1])) throw DomainError("h ladder must be strictly decreasing");
  const double horizon_time = static_cast<double>(cfg.horizon_steps) * h_ladder.front();
  EpsilonReport report;
  for (double h : h_ladder) {
    const ImpulseModel m = model.at_step(h);
    const BellmanSolution sol = solve_undiscounted(m, opts);
    EpsilonRow row;
    row.h = h;
    row.lambda = sol.lambda;
    row.strategy = extract_strategy(sol, m, tie_tol);
    SimConfig local = cfg;
    const double ratio = h_ladder.front() / h;
    local.horizon_steps = static_cast<std::size_t>(std::llround(horizon_time / h));
    local.checkpoints.clear();
    for (std::size_t c : cfg.checkpoints)
      local.checkpoints.push_back(static_cast<std::size_t>(std::llround(static_cast<double>(c) * ratio)));
    row.undiscounted = simulate_undiscounted(row.strategy, m, local);
    row.discounted = simulate_discounted(row.strategy, m, beta, local);
    row.gap_undiscounted = std::abs(row.undiscounted.mean - row.lambda);
    row.gap_discounted = std::abs(row.discounted.mean - row.lambda);
    report.rows.push_back(std::move(row));
  }
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    const auto& a = report.rows[i - 1];
    const auto& b = report.rows[i];
    const double noise_u = 3.0 * std::hypot(a.undiscounted.std_error, b.undiscounted.std_error);
    const double noise_d = 3.0 * std::hypot(a.discounted.std_error, b.discounted.std_error);
    if (b.gap_undiscounted > a.gap_undiscounted + noise_u || b.gap_discounted > a.gap_discounted + noise_d)
      report.non_increasing_within_noise = false;
  }
  return report;
}

}  // namespace impulse
