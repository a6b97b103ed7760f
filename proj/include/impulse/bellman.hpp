#pragma once

// Average-cost Bellman equations for impulse control on a time grid.
//
// Undiscounted:  w(x) = min(g(x) - lambda + E_x w(X_h),  M w(x)),
//                M w(x) = min_{xi in U} c(x,xi)/h + w(xi).
// Discounted:    w(k,x) = min(phi(k)(g(x) - lambda(k)) + E_x w(k+1, X_h),  M_k w(k,x)),
//                M_k w(k,x) = min_{xi in U} phi(k) c(x,xi)/h + w(k,xi).
//
// Both are solved through the merged one-step operator
//   F v(x) = min_{xi in U u {x}} scale * (cbar(x,xi)/h + g(xi)) + E_xi v,
// with cbar(x,x) = 0, which contracts in the span seminorm at rate Lambda_h.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "impulse/discounting.hpp"
#include "impulse/errors.hpp"
#include "impulse/linalg.hpp"
#include "impulse/model.hpp"

namespace impulse {

/// Reference state for the additive gauge: w(kReferenceState) = 0.
inline constexpr std::size_t kReferenceState = 0;

/// Exit-time strategy: continue inside D, shift x outside D to psi(x) in D n U.
class StationaryStrategy {
 public:
  StationaryStrategy() = default;

  static StationaryStrategy make(const StateSpace& states, const std::vector<std::size_t>& continuation,
                                 const std::map<std::size_t, std::size_t>& psi) {
    const std::size_t n = states.size();
    std::vector<bool> in_d(n, false);
    for (std::size_t x : continuation) {
      if (x >= n) throw StrategyError("continuation state out of range");
      in_d[x] = true;
    }
    std::vector<std::optional<std::size_t>> shift(n);
    for (const auto& [x, target] : psi) {
      if (x >= n || target >= n) throw StrategyError("shift map index out of range");
      if (in_d[x])
        throw StrategyError("shift defined on continuation state " + std::to_string(x));
      if (!states.is_target(target))
        throw StrategyError("shift target " + std::to_string(target) + " is not in U");
      if (!in_d[target])
        throw StrategyError("shift of state " + std::to_string(x) + " lands on " +
                            std::to_string(target) + " outside the continuation set");
      shift[x] = target;
    }
    for (std::size_t x = 0; x < n; ++x)
      if (!in_d[x] && !shift[x])
        throw StrategyError("state " + std::to_string(x) + " is outside D but has no shift");
    StationaryStrategy s;
    s.shift_ = std::move(shift);
    return s;
  }

  /// D = E, no impulses.
  static StationaryStrategy no_impulse(std::size_t n) {
    StationaryStrategy s;
    s.shift_.assign(n, std::nullopt);
    return s;
  }

  std::size_t size() const noexcept { return shift_.size(); }
  bool continues(std::size_t x) const { return !shift_.at(x).has_value(); }
  std::size_t shift(std::size_t x) const { return shift_.at(x).value(); }

  std::vector<std::size_t> continuation_set() const {
    std::vector<std::size_t> d;
    for (std::size_t x = 0; x < shift_.size(); ++x)
      if (!shift_[x]) d.push_back(x);
    return d;
  }

  std::map<std::size_t, std::size_t> shift_map() const {
    std::map<std::size_t, std::size_t> m;
    for (std::size_t x = 0; x < shift_.size(); ++x)
      if (shift_[x]) m.emplace(x, *shift_[x]);
    return m;
  }

  friend bool operator==(const StationaryStrategy&, const StationaryStrategy&) = default;

 private:
  std::vector<std::optional<std::size_t>> shift_;
};

/// Minimum and minimizer per state.
struct OperatorResult {
  std::vector<double> value;
  std::vector<std::size_t> argmin;
};

/// M w(x) = min_{xi in U} phi_k * c(x,xi)/h + w(xi). Ties go to the lowest state index.
inline OperatorResult apply_M(const ImpulseModel& model, std::span<const double> w, double phi_k = 1.0) {
  const std::size_t n = model.size();
  const double inv_h = 1.0 / model.h();
  OperatorResult out{std::vector<double>(n), std::vector<std::size_t>(n)};
  for (std::size_t x = 0; x < n; ++x) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t xi : model.states().targets()) {
      const double v = phi_k * model.shift_cost(x, xi) * inv_h + w[xi];
      if (v < best) {
        best = v;
        arg = xi;
      }
    }
    out.value[x] = best;
    out.argmin[x] = arg;
  }
  return out;
}

namespace detail {

// F v(x) given the precomputed expectation ev = P v.
inline OperatorResult apply_merged(const ImpulseModel& model, std::span<const double> ev, double scale) {
  const std::size_t n = model.size();
  const double inv_h = 1.0 / model.h();
  const auto& targets = model.states().targets();
  OperatorResult out{std::vector<double>(n), std::vector<std::size_t>(n)};
  for (std::size_t x = 0; x < n; ++x) {
    const double stay = scale * model.g(x) + ev[x];
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = x;
    bool stay_considered = false;
    for (std::size_t xi : targets) {
      if (!stay_considered && x <= xi) {
        stay_considered = true;
        if (stay < best) {
          best = stay;
          arg = x;
        }
        if (xi == x) continue;
      }
      const double v = scale * (model.shift_cost(x, xi) * inv_h + model.g(xi)) + ev[xi];
      if (v < best) {
        best = v;
        arg = xi;
      }
    }
    if (!stay_considered && stay < best) {
      best = stay;
      arg = x;
    }
    out.value[x] = best;
    out.argmin[x] = arg;
  }
  return out;
}

inline std::vector<double> continuation_values(const ImpulseModel& model, std::span<const double> next_w,
                                               double scale, double lambda) {
  std::vector<double> ev = mat_vec(model.kernel().matrix, next_w);
  for (std::size_t x = 0; x < ev.size(); ++x) ev[x] += scale * (model.g(x) - lambda);
  return ev;
}

}  // namespace detail

/// F v for the undiscounted problem (scale 1) or step k of the discounted one (scale phi(k)).
inline OperatorResult apply_F(const ImpulseModel& model, std::span<const double> next_v, double scale = 1.0) {
  const std::vector<double> ev = mat_vec(model.kernel().matrix, next_v);
  return detail::apply_merged(model, ev, scale);
}

struct SolverOptions {
  double tol = 1e-10;
  std::size_t max_iterations = 1'000'000;
};

struct BellmanSolution {
  std::vector<double> w;              // w(kReferenceState) = 0
  double lambda = 0.0;                // optimal average cost per step
  double residual = 0.0;              // sup |w + lambda - F w| after one exact application
  std::size_t iterations = 0;
  double contraction_factor = 0.0;    // Lambda_h
  double stop_threshold = 0.0;        // tol * (1 - Lambda_h)
  std::vector<double> spans;          // span(v_{t+1} - v_t) for every recorded iterate
};

/// Relative value iteration on F. Stops once span(v_{t+1} - v_t) <= tol * (1 - Lambda_h).
///
/// Successive differences are propagated directly: with unchanged minimizers the new
/// difference is P applied to the old one, otherwise the directly computed difference is
/// clamped into its bracket [E_{new} d, E_{old} d]. This keeps the recorded spans free of
/// cancellation against the (much larger) iterates themselves.
inline BellmanSolution solve_undiscounted(const ImpulseModel& model, const SolverOptions& opts = {}) {
  model.require_ergodic();
  if (!(opts.tol > 0.0)) throw DomainError("solver tolerance must be positive");
  const std::size_t n = model.size();
  const Matrix& p = model.kernel().matrix;
  const double contraction = model.contraction();
  const double threshold = opts.tol * (1.0 - contraction);

  BellmanSolution sol;
  sol.contraction_factor = contraction;
  sol.stop_threshold = threshold;

  std::vector<double> v(n, 0.0);
  OperatorResult cur = apply_F(model, v);
  std::vector<double> d(n);
  for (std::size_t x = 0; x < n; ++x) d[x] = cur.value[x] - cur.value[kReferenceState];
  sol.spans.push_back(span_seminorm(d));
  std::size_t iterations = 1;

  while (sol.spans.back() > threshold) {
    if (iterations >= opts.max_iterations) {
      std::ostringstream os;
      os << "relative value iteration hit the cap of " << opts.max_iterations
         << " iterations (last span " << sol.spans.back() << ")";
      throw ConvergenceError(os.str(), sol.spans.back());
    }
    for (std::size_t x = 0; x < n; ++x) v[x] += d[x];
    v[kReferenceState] = 0.0;
    OperatorResult next = apply_F(model, v);
    const std::vector<double> pd = mat_vec(p, d);
    std::vector<double> delta(n);
    for (std::size_t x = 0; x < n; ++x) {
      const double upper = pd[cur.argmin[x]];
      if (next.argmin[x] == cur.argmin[x]) {
        delta[x] = upper;
      } else {
        const double lower = pd[next.argmin[x]];
        delta[x] = std::clamp(next.value[x] - cur.value[x], std::min(lower, upper),
                              std::max(lower, upper));
      }
    }
    for (std::size_t x = 0; x < n; ++x) d[x] = delta[x] - delta[kReferenceState];
    cur = std::move(next);
    sol.spans.push_back(span_seminorm(d));
    ++iterations;
  }
  for (std::size_t x = 0; x < n; ++x) v[x] += d[x];
  v[kReferenceState] = 0.0;

  const OperatorResult final_step = apply_F(model, v);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t x = 0; x < n; ++x) {
    const double diff = final_step.value[x] - v[x];
    lo = std::min(lo, diff);
    hi = std::max(hi, diff);
  }
  sol.w = std::move(v);
  sol.lambda = 0.5 * (lo + hi);
  sol.residual = 0.5 * (hi - lo);
  sol.iterations = iterations;
  return sol;
}

/// sup_x |w(x) - min(cont(x), M w(x))| for the undiscounted equation in its original form.
inline double bellman_residual(const ImpulseModel& model, std::span<const double> w, double lambda) {
  const auto cont = detail::continuation_values(model, w, 1.0, lambda);
  const auto mw = apply_M(model, w);
  double r = 0.0;
  for (std::size_t x = 0; x < w.size(); ++x)
    r = std::max(r, std::abs(w[x] - std::min(cont[x], mw.value[x])));
  return r;
}

struct DiscountedBellmanSolution {
  Matrix w;                         // K x n, w(k, kReferenceState) = 0
  std::vector<double> boundary;     // w(K, .), needed by one-step checks at k = K-1
  std::vector<double> lambda;       // lambda(k), k < K
  std::size_t horizon = 0;          // K
  std::size_t buffer = 0;           // extra backward steps absorbed before k = K
  double residual = 0.0;            // sup |w(k,x) - min(cont, M_k w)(k,x)| over retained k
  double truncation_bound = 0.0;    // Lambda^B * 2 * span_bound
  double contraction_factor = 0.0;

  std::span<const double> row(std::size_t k) const {
    return k < horizon ? w.row(k) : std::span<const double>(boundary);
  }
};

/// Backward steps needed so that the zero terminal condition perturbs retained values by <= tol.
inline std::size_t discounted_buffer(const ImpulseModel& model, double tol) {
  const double contraction = model.contraction();
  const double g_span = span_seminorm(model.costs().running);
  const double c_sup = sup_norm(model.costs().shift.data());
  const double span_bound = (g_span + c_sup / model.h()) / (1.0 - contraction);
  if (contraction <= 0.0 || span_bound <= 0.0) return 1;
  const double steps = std::log(tol / (2.0 * span_bound)) / std::log(contraction);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::max(steps, 0.0))));
}

/// phi must hold at least K + discounted_buffer(model, tol) values.
inline DiscountedBellmanSolution solve_discounted(const ImpulseModel& model, const PhiSequence& phi,
                                                  std::size_t K, double tol = 1e-10) {
  model.require_ergodic();
  if (K == 0) throw DomainError("discounted horizon K must be positive");
  if (std::abs(phi.h() - model.h()) > 1e-12 * model.h())
    throw DomainError("discount sequence grid step does not match the model step");
  const std::size_t buffer = discounted_buffer(model, tol);
  if (phi.size() < K + buffer) {
    throw DomainError("discount sequence has " + std::to_string(phi.size()) +
                      " values, solver needs K + buffer = " + std::to_string(K + buffer));
  }
  const std::size_t n = model.size();
  const double contraction = model.contraction();

  DiscountedBellmanSolution sol;
  sol.horizon = K;
  sol.buffer = buffer;
  sol.contraction_factor = contraction;
  sol.w = Matrix(K, n);
  sol.lambda.assign(K, 0.0);
  {
    const double g_span = span_seminorm(model.costs().running);
    const double c_sup = sup_norm(model.costs().shift.data());
    const double span_bound = (g_span + c_sup / model.h()) / (1.0 - contraction);
    sol.truncation_bound = std::pow(contraction, static_cast<double>(buffer)) * 2.0 * span_bound;
  }

  std::vector<double> next(n, 0.0);
  for (std::size_t step = K + buffer; step-- > 0;) {
    const double scale = phi[step];
    const OperatorResult f = apply_F(model, next, scale);
    const double offset = f.value[kReferenceState];
    std::vector<double> cur(n);
    for (std::size_t x = 0; x < n; ++x) cur[x] = f.value[x] - offset;
    cur[kReferenceState] = 0.0;
    if (step < K) {
      sol.lambda[step] = offset / scale;
      std::copy(cur.begin(), cur.end(), sol.w.row(step).begin());
    } else if (step == K) {
      sol.boundary = cur;
    }
    next = std::move(cur);
  }
  if (sol.boundary.empty()) sol.boundary.assign(n, 0.0);

  double residual = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const auto wk = sol.w.row(k);
    const auto cont = detail::continuation_values(model, sol.row(k + 1), phi[k], sol.lambda[k]);
    const auto mw = apply_M(model, wk, phi[k]);
    for (std::size_t x = 0; x < n; ++x)
      residual = std::max(residual, std::abs(wk[x] - std::min(cont[x], mw.value[x])));
  }
  sol.residual = residual;
  return sol;
}

/// Convenience: computes phi for the spec with the required length first.
inline DiscountedBellmanSolution solve_discounted(const ImpulseModel& model, const DiscountSpec& beta,
                                                  std::size_t K, double tol = 1e-10) {
  const std::size_t needed = K + discounted_buffer(model, tol);
  return solve_discounted(model, compute_phi(beta, model.h(), needed), K, tol);
}

/// sum_{i<n} phi(i) lambda(i) / sum_{i<n} phi(i).
inline double weighted_lambda(const DiscountedBellmanSolution& sol, const PhiSequence& phi, std::size_t n) {
  if (n == 0 || n > sol.horizon) throw DomainError("weighted_lambda needs 0 < n <= K");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += phi[i] * sol.lambda[i];
    den += phi[i];
  }
  return num / den;
}

/// D = {x : cont(x) < M w(x) - tie_tol}, psi = argmin of M w outside D.
inline StationaryStrategy extract_strategy(const BellmanSolution& sol, const ImpulseModel& model,
                                           double tie_tol = 1e-9) {
  if (sol.residual > tie_tol) {
    std::ostringstream os;
    os << "solution residual " << sol.residual << " exceeds tie tolerance " << tie_tol;
    throw DomainError(os.str());
  }
  const std::size_t n = model.size();
  const auto cont = detail::continuation_values(model, sol.w, 1.0, sol.lambda);
  const auto mw = apply_M(model, sol.w);
  std::vector<bool> in_d(n);
  for (std::size_t x = 0; x < n; ++x) in_d[x] = cont[x] < mw.value[x] - tie_tol;
  std::vector<std::size_t> d;
  std::map<std::size_t, std::size_t> psi;
  for (std::size_t x = 0; x < n; ++x) {
    if (in_d[x]) {
      d.push_back(x);
      continue;
    }
    const std::size_t target = mw.argmin[x];
    if (!in_d[target]) {
      std::ostringstream os;
      os << "degenerate tie: shift of state " << x << " lands on " << target
         << ", which is itself an intervention state; retry with a smaller tie tolerance";
      throw DegenerateTieError(os.str());
    }
    psi.emplace(x, target);
  }
  return StationaryStrategy::make(model.states(), d, psi);
}

struct DriftViolation {
  std::size_t k = 0;
  std::size_t x = 0;
  double drift = 0.0;
  bool continuation = false;  // flagged by the martingale check rather than the submartingale one
};

struct DriftReport {
  double min_drift = std::numeric_limits<double>::infinity();
  double max_abs_continuation_drift = 0.0;
  double tolerance = 0.0;
  std::vector<DriftViolation> violations;

  bool ok() const { return violations.empty(); }
};

namespace detail {

inline void drift_step(DriftReport& report, std::size_t k, std::span<const double> wk,
                       std::span<const double> cont, std::span<const double> mw, double tie_tol) {
  for (std::size_t x = 0; x < wk.size(); ++x) {
    const double drift = cont[x] - wk[x];
    report.min_drift = std::min(report.min_drift, drift);
    const bool continuation = cont[x] < mw[x] - tie_tol;
    if (continuation) report.max_abs_continuation_drift = std::max(report.max_abs_continuation_drift, std::abs(drift));
    if (drift < -report.tolerance) {
      report.violations.push_back({k, x, drift, false});
    } else if (continuation && std::abs(drift) > report.tolerance) {
      report.violations.push_back({k, x, drift, true});
    }
  }
}

}  // namespace detail

/// One-step drift of z(n) = sum (g - lambda) + w(X_n): nonnegative everywhere,
/// zero on the continuation region.
inline DriftReport check_martingale_drift(const BellmanSolution& sol, const ImpulseModel& model,
                                          double tolerance, double tie_tol = 1e-9) {
  DriftReport report;
  report.tolerance = tolerance;
  const auto cont = detail::continuation_values(model, sol.w, 1.0, sol.lambda);
  const auto mw = apply_M(model, sol.w);
  detail::drift_step(report, 0, sol.w, cont, mw.value, tie_tol);
  return report;
}

/// Discounted variant: drift(k,x) = phi(k)(g(x) - lambda(k)) + E_x w(k+1, X_h) - w(k,x).
inline DriftReport check_martingale_drift(const DiscountedBellmanSolution& sol, const ImpulseModel& model,
                                          const PhiSequence& phi, double tolerance, double tie_tol = 1e-9) {
  DriftReport report;
  report.tolerance = tolerance;
  for (std::size_t k = 0; k < sol.horizon; ++k) {
    const auto wk = sol.w.row(k);
    const auto cont = detail::continuation_values(model, sol.row(k + 1), phi[k], sol.lambda[k]);
    const auto mw = apply_M(model, wk, phi[k]);
    detail::drift_step(report, k, wk, cont, mw.value, tie_tol);
  }
  return report;
}

}  // namespace impulse
