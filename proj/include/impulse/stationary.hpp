#pragma once

// Exact analysis of stationary exit-time strategies: the controlled chain they induce,
// their Poisson equation, both long-run functionals, and exhaustive search over them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "impulse/bellman.hpp"
#include "impulse/discounting.hpp"
#include "impulse/errors.hpp"
#include "impulse/linalg.hpp"
#include "impulse/model.hpp"
#include "impulse/process.hpp"

namespace impulse {

/// Post-impulse chain of a stationary strategy. One step from y in D: move with P_h(y, .),
/// and on landing at z outside D pay c(z, psi(z))/h and jump to psi(z).
/// Rows of states outside D repeat the row of their shift target.
struct ControlledChain {
  StationaryStrategy strategy;
  Matrix kernel;
  std::vector<double> impulse_cost_rate;
};

inline ControlledChain build_controlled_chain(const StationaryStrategy& strategy, const ImpulseModel& model) {
  const std::size_t n = model.size();
  if (strategy.size() != n) throw StrategyError("strategy size does not match the model");
  const Matrix& p = model.kernel().matrix;
  const double inv_h = 1.0 / model.h();
  ControlledChain chain{strategy, Matrix(n, n), std::vector<double>(n, 0.0)};
  for (std::size_t y = 0; y < n; ++y) {
    if (!strategy.continues(y)) continue;
    for (std::size_t z = 0; z < n; ++z) {
      const double prob = p(y, z);
      if (prob == 0.0) continue;
      if (strategy.continues(z)) {
        chain.kernel(y, z) += prob;
      } else {
        const std::size_t target = strategy.shift(z);
        chain.kernel(y, target) += prob;
        chain.impulse_cost_rate[y] += prob * model.shift_cost(z, target) * inv_h;
      }
    }
  }
  for (std::size_t y = 0; y < n; ++y) {
    if (strategy.continues(y)) continue;
    const std::size_t target = strategy.shift(y);
    std::copy(chain.kernel.row(target).begin(), chain.kernel.row(target).end(), chain.kernel.row(y).begin());
    chain.impulse_cost_rate[y] = chain.impulse_cost_rate[target];
  }
  return chain;
}

struct PoissonSolution {
  std::vector<double> w;   // gauge: zero at the lowest-index state of D
  double lambda = 0.0;
  double residual = 0.0;
  std::size_t iterations = 0;
  double contraction_factor = 0.0;
};

/// Span-contraction solution of  w = g - lambda + E_x[w(X_h)] on D,  w(x) = c(x,psi(x))/h + w(psi(x)) off D.
inline PoissonSolution solve_poisson(const StationaryStrategy& strategy, const ImpulseModel& model,
                                     const SolverOptions& opts = {}) {
  const ControlledChain chain = build_controlled_chain(strategy, model);
  const std::vector<std::size_t> d = strategy.continuation_set();
  const std::size_t m = d.size();
  const std::size_t n = model.size();

  // Restriction to D: chain.kernel has no mass on columns outside D.
  Matrix kd(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) kd(i, j) = chain.kernel(d[i], d[j]);
  const double contraction = doeblin_coefficient(kd);
  if (!(contraction < 1.0))
    throw ErgodicityError("controlled chain is not uniformly ergodic on D", contraction);
  std::vector<double> cost(m);
  for (std::size_t i = 0; i < m; ++i) cost[i] = model.g(d[i]) + chain.impulse_cost_rate[d[i]];

  const double threshold = opts.tol * (1.0 - contraction);
  // Linear operator: successive differences evolve by kd exactly.
  std::vector<double> v(m, 0.0);
  std::vector<double> diff(m);
  for (std::size_t i = 0; i < m; ++i) diff[i] = cost[i] - cost[0];
  std::size_t iterations = 1;
  while (span_seminorm(diff) > threshold) {
    if (iterations >= opts.max_iterations)
      throw ConvergenceError("Poisson iteration hit the iteration cap", span_seminorm(diff));
    for (std::size_t i = 0; i < m; ++i) v[i] += diff[i];
    std::vector<double> next = mat_vec(kd, diff);
    const double ref = next[0];
    for (std::size_t i = 0; i < m; ++i) diff[i] = next[i] - ref;
    ++iterations;
  }
  for (std::size_t i = 0; i < m; ++i) v[i] += diff[i];
  v[0] = 0.0;

  const std::vector<double> kv = mat_vec(kd, v);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < m; ++i) {
    const double step = cost[i] + kv[i] - v[i];
    lo = std::min(lo, step);
    hi = std::max(hi, step);
  }

  PoissonSolution sol;
  sol.lambda = 0.5 * (lo + hi);
  sol.residual = 0.5 * (hi - lo);
  sol.iterations = iterations;
  sol.contraction_factor = contraction;
  sol.w.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) sol.w[d[i]] = v[i];
  const double inv_h = 1.0 / model.h();
  for (std::size_t x = 0; x < n; ++x) {
    if (strategy.continues(x)) continue;
    const std::size_t target = strategy.shift(x);
    sol.w[x] = model.shift_cost(x, target) * inv_h + sol.w[target];
  }
  return sol;
}

/// sup over D of |w(x) - (g(x) - lambda + E_x w(X_h))| and over D^c of the shift identity,
/// evaluated with the uncontrolled kernel and the extended w.
inline double poisson_residual(const StationaryStrategy& strategy, const ImpulseModel& model,
                               const PoissonSolution& sol) {
  const std::vector<double> ew = mat_vec(model.kernel().matrix, sol.w);
  const double inv_h = 1.0 / model.h();
  double r = 0.0;
  for (std::size_t x = 0; x < model.size(); ++x) {
    if (strategy.continues(x)) {
      r = std::max(r, std::abs(sol.w[x] - (model.g(x) - sol.lambda + ew[x])));
    } else {
      const std::size_t t = strategy.shift(x);
      r = std::max(r, std::abs(sol.w[x] - (model.shift_cost(x, t) * inv_h + sol.w[t])));
    }
  }
  return r;
}

/// lambda_V = pi (g + impulse_cost_rate) with pi the invariant law of the controlled chain.
/// Independent of the initial state.
inline double evaluate_undiscounted_exact(const StationaryStrategy& strategy, const ImpulseModel& model,
                                          std::size_t /*x0*/ = 0) {
  const ControlledChain chain = build_controlled_chain(strategy, model);
  const std::vector<double> pi = stationary_distribution(chain.kernel);
  double value = 0.0;
  for (std::size_t x = 0; x < model.size(); ++x)
    value += pi[x] * (model.g(x) + chain.impulse_cost_rate[x]);
  return value;
}

struct DiscountedEvaluation {
  double value = 0.0;
  std::vector<double> curve;  // curve[n-1] = value after n steps
};

/// Exact expectation of the discounted grid functional after n = 1..N steps:
///   [sum_{i<n} phi(i) E g(Y_i) + sum_{i<=n} phi(i) E(impulse cost at step i)] / sum_{i<n} phi(i).
/// The impulse at step n is charged with phi(n), so phi needs at least N + 1 values.
inline DiscountedEvaluation evaluate_discounted_exact(const StationaryStrategy& strategy, const ImpulseModel& model,
                                                      const PhiSequence& phi, std::size_t x0, std::size_t N) {
  if (N == 0) throw DomainError("evaluate_discounted_exact needs N >= 1");
  if (phi.size() < N + 1)
    throw DomainError("discount sequence needs N + 1 values to charge the impulse at step N");
  const std::size_t n = model.size();
  if (x0 >= n) throw DomainError("initial state out of range");
  const ControlledChain chain = build_controlled_chain(strategy, model);

  std::vector<double> mu(n, 0.0);
  double numerator = 0.0;
  if (strategy.continues(x0)) {
    mu[x0] = 1.0;
  } else {
    const std::size_t target = strategy.shift(x0);
    mu[target] = 1.0;
    numerator += phi[0] * model.shift_cost(x0, target) / model.h();
  }
  DiscountedEvaluation out;
  out.curve.reserve(N);
  double denominator = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    numerator += phi[i] * dot(mu, model.costs().running) + phi[i + 1] * dot(mu, chain.impulse_cost_rate);
    denominator += phi[i];
    out.curve.push_back(numerator / denominator);
    mu = left_apply(mu, chain.kernel);
  }
  out.value = out.curve.back();
  return out;
}

struct OracleRow {
  StationaryStrategy strategy;
  double value = 0.0;
};

struct OracleResult {
  double lambda_star = 0.0;
  StationaryStrategy strategy_star;
  std::size_t strategies_evaluated = 0;
  std::vector<OracleRow> table;  // filled only when requested
};

inline constexpr std::size_t kOracleMaxStates = 12;
inline constexpr std::size_t kOracleMaxTargets = 6;

/// Visits every valid stationary strategy: D = E first, then D by decreasing bitmask
/// (bit x set when x is in D), psi in lexicographic order over the states outside D.
template <typename Visitor>
void for_each_stationary_strategy(const StateSpace& states, Visitor&& visit) {
  const std::size_t n = states.size();
  const std::size_t full = (std::size_t{1} << n) - 1;
  for (std::size_t mask = full + 1; mask-- > 1;) {
    std::vector<std::size_t> d;
    std::vector<std::size_t> outside;
    std::vector<std::size_t> allowed;
    for (std::size_t x = 0; x < n; ++x) {
      if (mask & (std::size_t{1} << x)) {
        d.push_back(x);
        if (states.is_target(x)) allowed.push_back(x);
      } else {
        outside.push_back(x);
      }
    }
    if (!outside.empty() && allowed.empty()) continue;
    std::vector<std::size_t> choice(outside.size(), 0);
    while (true) {
      std::map<std::size_t, std::size_t> psi;
      for (std::size_t i = 0; i < outside.size(); ++i) psi.emplace(outside[i], allowed[choice[i]]);
      visit(StationaryStrategy::make(states, d, psi));
      bool advanced = false;
      for (std::size_t pos = outside.size(); pos-- > 0;) {
        if (++choice[pos] < allowed.size()) {
          advanced = true;
          break;
        }
        choice[pos] = 0;
      }
      if (!advanced) break;
    }
  }
}

/// Exhaustive minimum of the exact undiscounted value over stationary strategies.
/// A later strategy replaces the incumbent only when it is lower by more than 1e-12.
/// Batches are evaluated on worker threads and reduced in visiting order, so the
/// result does not depend on the thread count.
inline OracleResult brute_force_optimum(const ImpulseModel& model, bool keep_table = false,
                                        unsigned threads = 0) {
  const std::size_t n = model.size();
  if (n > kOracleMaxStates || model.states().targets().size() > kOracleMaxTargets) {
    std::ostringstream os;
    os << "brute-force oracle limited to |E| <= " << kOracleMaxStates << " and |U| <= " << kOracleMaxTargets
       << " (got " << n << ", " << model.states().targets().size() << ")";
    throw SizeError(os.str());
  }
  model.require_ergodic();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());

  OracleResult result;
  result.lambda_star = std::numeric_limits<double>::infinity();
  constexpr std::size_t kBatch = 2048;
  std::vector<StationaryStrategy> batch;
  std::vector<double> values;

  auto flush = [&] {
    values.assign(batch.size(), 0.0);
    auto work = [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) values[i] = evaluate_undiscounted_exact(batch[i], model);
    };
    if (threads == 1 || batch.size() < 64) {
      work(0, batch.size());
    } else {
      std::vector<std::thread> pool;
      const std::size_t chunk = (batch.size() + threads - 1) / threads;
      for (std::size_t b = 0; b < batch.size(); b += chunk)
        pool.emplace_back(work, b, std::min(batch.size(), b + chunk));
      for (auto& t : pool) t.join();
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (values[i] < result.lambda_star - 1e-12) {
        result.lambda_star = values[i];
        result.strategy_star = batch[i];
      }
      if (keep_table) result.table.push_back({batch[i], values[i]});
    }
    result.strategies_evaluated += batch.size();
    batch.clear();
  };

  for_each_stationary_strategy(model.states(), [&](StationaryStrategy s) {
    batch.push_back(std::move(s));
    if (batch.size() == kBatch) flush();
  });
  if (!batch.empty()) flush();
  return result;
}

}  // namespace impulse
