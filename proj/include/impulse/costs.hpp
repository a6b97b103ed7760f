#pragma once

// Running cost g over E and shift cost c over E x U.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "impulse/errors.hpp"
#include "impulse/linalg.hpp"
#include "impulse/process.hpp"
#include "impulse/validation.hpp"

namespace impulse {

/// g is a cost rate (minimized); c(x, xi) is charged per impulse; columns of c follow U.
struct CostModel {
  std::vector<double> running;
  Matrix shift;  // |E| x |U|
  double c0 = 0.0;

  /// c(x, xi) with xi given as a state index in U.
  double shift_cost(const StateSpace& states, std::size_t x, std::size_t xi) const {
    return shift(x, states.target_column(xi));
  }
};

struct CostViolation {
  std::size_t x = 0;
  std::size_t via = 0;     // eta; equal to target for positivity violations
  std::size_t target = 0;  // xi
  double excess = 0.0;
  bool positivity = false;
};

struct CostValidation : ValidationReport {
  double tightest_c0 = 0.0;
  std::vector<CostViolation> violations;
};

/// Exhaustive check of c >= c0 > 0 and c(x,xi) <= c(x,eta) + c(eta,xi) for x in E, eta, xi in U.
inline CostValidation validate_costs(const CostModel& m, const StateSpace& states) {
  const std::size_t n = states.size();
  const auto& targets = states.targets();
  if (m.running.size() != n) throw ShapeError("running cost g must have one entry per state");
  if (m.shift.rows() != n || m.shift.cols() != targets.size())
    throw ShapeError("shift cost c must be |E| x |U|");

  CostValidation report;
  const bool g_finite = std::all_of(m.running.begin(), m.running.end(),
                                    [](double v) { return std::isfinite(v); });
  report.add("g finite", g_finite);
  report.add("c finite", m.shift.all_finite());

  double tightest = std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t j = 0; j < targets.size(); ++j) {
      const double c = m.shift(x, j);
      tightest = std::min(tightest, c);
      if (!(c > 0.0) || c < m.c0) {
        report.violations.push_back({x, targets[j], targets[j], m.c0 - c, true});
      }
    }
  }
  report.tightest_c0 = tightest;
  const std::size_t positivity_failures = report.violations.size();
  {
    std::ostringstream os;
    if (positivity_failures > 0) {
      const auto& v = report.violations.front();
      os << positivity_failures << " entries below c0 or nonpositive, first c(" << v.x << ","
         << v.target << ")";
    }
    report.add("c >= c0 > 0", positivity_failures == 0 && m.c0 > 0.0,
               m.c0 > 0.0 ? os.str() : "c0 must be positive");
  }

  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t a = 0; a < targets.size(); ++a) {      // eta
      for (std::size_t b = 0; b < targets.size(); ++b) {    // xi
        const double direct = m.shift(x, b);
        const double via = m.shift(x, a) + m.shift(targets[a], b);
        if (direct > via + 1e-12) report.violations.push_back({x, targets[a], targets[b], direct - via, false});
      }
    }
  }
  const std::size_t triangle_failures = report.violations.size() - positivity_failures;
  {
    std::ostringstream os;
    if (triangle_failures > 0) {
      const auto& v = report.violations[positivity_failures];
      os << triangle_failures << " violated triples, first c(" << v.x << "," << v.target
         << ") > c(" << v.x << "," << v.via << ") + c(" << v.via << "," << v.target << ")";
    }
    report.add("triangle inequality", triangle_failures == 0, os.str());
  }
  return report;
}

/// Nondecreasing function given by (d, value) knots, linear in between, constant past the end.
class SubadditiveTable {
 public:
  static SubadditiveTable make(std::vector<std::pair<double, double>> knots) {
    if (knots.empty()) throw ConstructionError("subadditive table needs at least one knot");
    if (knots.front().first != 0.0 || knots.front().second != 0.0)
      throw ConstructionError("subadditive table must start at h(0) = 0");
    for (std::size_t i = 1; i < knots.size(); ++i) {
      if (!(knots[i].first > knots[i - 1].first))
        throw ConstructionError("subadditive table abscissae must increase");
      if (knots[i].second < knots[i - 1].second)
        throw ConstructionError("subadditive table must be nondecreasing");
    }
    SubadditiveTable t;
    t.knots_ = std::move(knots);
    return t;
  }

  double operator()(double d) const {
    if (d <= 0.0) return 0.0;
    if (d >= knots_.back().first) return knots_.back().second;
    auto it = std::upper_bound(knots_.begin(), knots_.end(), d,
                               [](double v, const auto& k) { return v < k.first; });
    const auto& [d1, v1] = *it;
    const auto& [d0, v0] = *(it - 1);
    return v0 + (d - d0) / (d1 - d0) * (v1 - v0);
  }

  const std::vector<std::pair<double, double>>& knots() const noexcept { return knots_; }

 private:
  std::vector<std::pair<double, double>> knots_;
};

inline double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// c(x, xi) = h(rho(x, xi)) + c0 with rho Euclidean on the state coordinates.
/// h must be subadditive on every sum of sampled distances (table knots and state distances).
inline CostModel metric_cost(const StateSpace& states, std::vector<double> running,
                             const SubadditiveTable& h, double c0) {
  if (!states.has_coords()) throw ConstructionError("metric cost needs state coordinates");
  if (!(c0 > 0.0)) throw ConstructionError("metric cost needs c0 > 0");
  const std::size_t n = states.size();
  const auto& coords = states.coords();

  std::vector<double> samples;
  for (const auto& k : h.knots()) samples.push_back(k.first);
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = x + 1; y < n; ++y) samples.push_back(euclidean(coords[x], coords[y]));
  for (double a : samples) {
    for (double b : samples) {
      if (h(a + b) > h(a) + h(b) + 1e-12) {
        std::ostringstream os;
        os << "shift function is not subadditive: h(" << a << "+" << b << ") = " << h(a + b)
           << " > " << h(a) + h(b);
        throw ConstructionError(os.str());
      }
    }
  }

  CostModel m;
  m.running = std::move(running);
  m.shift = Matrix(n, states.targets().size());
  m.c0 = c0;
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t j = 0; j < states.targets().size(); ++j)
      m.shift(x, j) = h(euclidean(coords[x], coords[states.targets()[j]])) + c0;
  return m;
}

}  // namespace impulse
