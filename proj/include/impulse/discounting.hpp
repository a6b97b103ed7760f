#pragma once

// Discount functions beta on [0, inf) and their step averages
//   phi_h(i) = (1/h) * integral of beta over [ih, (i+1)h].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "impulse/errors.hpp"
#include "impulse/validation.hpp"

namespace impulse {

/// beta == 1: the undiscounted case.
struct ConstantDiscount {};

/// beta(t) = (1 + rate * t)^(-exponent).
struct HyperbolicDiscount {
  double rate = 1.0;
  double exponent = 1.0;
};

/// Monotone piecewise-linear interpolation through (t, beta(t)) knots.
struct TabulatedDiscount {
  std::vector<std::pair<double, double>> points;
};

class DiscountSpec {
 public:
  using Family = std::variant<ConstantDiscount, HyperbolicDiscount, TabulatedDiscount>;

  static DiscountSpec constant(std::string description = "constant") {
    return DiscountSpec(ConstantDiscount{}, std::move(description));
  }

  static DiscountSpec hyperbolic(double rate, double exponent, std::string description = {}) {
    if (!(rate > 0.0) || !std::isfinite(rate))
      throw DomainError("hyperbolic discount needs rate > 0");
    if (!(exponent > 0.0) || !std::isfinite(exponent))
      throw DomainError("hyperbolic discount needs exponent > 0");
    if (description.empty()) {
      std::ostringstream os;
      os << "hyperbolic(rate=" << rate << ", exponent=" << exponent << ")";
      description = os.str();
    }
    return DiscountSpec(HyperbolicDiscount{rate, exponent}, std::move(description));
  }

  /// Knots must start at t = 0, be strictly increasing in t, with values in (0, 1].
  static DiscountSpec tabulated(std::vector<std::pair<double, double>> points,
                                std::string description = "tabulated") {
    if (points.size() < 2) throw DomainError("tabulated discount needs at least two knots");
    if (points.front().first != 0.0) throw DomainError("tabulated discount must start at t = 0");
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto [t, b] = points[i];
      if (!std::isfinite(t) || !std::isfinite(b))
        throw DomainError("tabulated discount has a non-finite knot");
      if (!(b > 0.0) || b > 1.0)
        throw DomainError("tabulated discount values must lie in (0, 1]");
      if (i > 0 && !(t > points[i - 1].first))
        throw DomainError("tabulated discount knots must be strictly increasing in t");
    }
    return DiscountSpec(TabulatedDiscount{std::move(points)}, std::move(description));
  }

  const Family& family() const noexcept { return family_; }
  const std::string& description() const noexcept { return description_; }

  bool is_constant() const { return std::holds_alternative<ConstantDiscount>(family_); }

  /// Largest t at which beta is defined (infinite for closed-form families).
  double domain_end() const {
    if (const auto* tab = std::get_if<TabulatedDiscount>(&family_)) return tab->points.back().first;
    return INFINITY;
  }

 private:
  DiscountSpec(Family f, std::string d) : family_(std::move(f)), description_(std::move(d)) {}

  Family family_;
  std::string description_;
};

namespace detail {

inline std::size_t tabulated_segment(const TabulatedDiscount& tab, double t) {
  const auto& p = tab.points;
  auto it = std::upper_bound(p.begin(), p.end(), t,
                             [](double value, const auto& knot) { return value < knot.first; });
  std::size_t idx = static_cast<std::size_t>(it - p.begin());
  return idx == 0 ? 0 : std::min(idx - 1, p.size() - 2);
}

inline double tabulated_value(const TabulatedDiscount& tab, double t) {
  const auto& p = tab.points;
  if (t > p.back().first) {
    std::ostringstream os;
    os << "tabulated discount queried at t=" << t << " beyond last knot " << p.back().first;
    throw ExtrapolationError(os.str());
  }
  const std::size_t i = tabulated_segment(tab, t);
  const auto [t0, b0] = p[i];
  const auto [t1, b1] = p[i + 1];
  const double s = (t - t0) / (t1 - t0);
  return b0 + s * (b1 - b0);
}

// Exact integral of the interpolant over [a, b] (trapezoid per linear piece).
inline double tabulated_integral(const TabulatedDiscount& tab, double a, double b) {
  if (b > tab.points.back().first) {
    std::ostringstream os;
    os << "tabulated discount integrated up to t=" << b << " beyond last knot "
       << tab.points.back().first;
    throw ExtrapolationError(os.str());
  }
  double total = 0.0;
  double lo = a;
  std::size_t seg = tabulated_segment(tab, a);
  while (lo < b) {
    const double seg_end = tab.points[seg + 1].first;
    const double hi = std::min(b, seg_end);
    if (hi > lo) total += 0.5 * (hi - lo) * (tabulated_value(tab, lo) + tabulated_value(tab, hi));
    lo = hi;
    if (seg + 2 >= tab.points.size()) break;
    ++seg;
  }
  return total;
}

// integral of (1 + r s)^(-alpha) over [a, a + len], written to avoid cancellation.
inline double hyperbolic_integral(const HyperbolicDiscount& hyp, double a, double len) {
  const double r = hyp.rate;
  const double alpha = hyp.exponent;
  const double base = 1.0 + r * a;
  const double rel = std::log1p(r * len / base);
  if (alpha == 1.0) return rel / r;
  const double one_minus = 1.0 - alpha;
  return std::pow(base, one_minus) * std::expm1(one_minus * rel) / (r * one_minus);
}

}  // namespace detail

/// beta(t). Closed form for constant and hyperbolic families, interpolation for tabulated.
inline double eval_beta(const DiscountSpec& spec, double t) {
  if (!(t >= 0.0)) throw DomainError("discount function evaluated at negative time");
  return std::visit(
      [t](const auto& f) -> double {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, ConstantDiscount>) {
          return 1.0;
        } else if constexpr (std::is_same_v<F, HyperbolicDiscount>) {
          return std::pow(1.0 + f.rate * t, -f.exponent);
        } else {
          return detail::tabulated_value(f, t);
        }
      },
      spec.family());
}

/// Integral of beta over [a, b], 0 <= a <= b.
inline double integrate_beta(const DiscountSpec& spec, double a, double b) {
  if (!(a >= 0.0) || !(b >= a)) throw DomainError("integrate_beta needs 0 <= a <= b");
  return std::visit(
      [a, b](const auto& f) -> double {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, ConstantDiscount>) {
          return b - a;
        } else if constexpr (std::is_same_v<F, HyperbolicDiscount>) {
          return detail::hyperbolic_integral(f, a, b - a);
        } else {
          return detail::tabulated_integral(f, a, b);
        }
      },
      spec.family());
}

/// Step-averaged discount sequence phi_h(0..K-1).
class PhiSequence {
 public:
  PhiSequence(double h, std::vector<double> values) : h_(h), values_(std::move(values)) {}

  double h() const noexcept { return h_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }

  /// sum_{i<n} phi(i)
  double partial_sum(std::size_t n) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += values_[i];
    return s;
  }

 private:
  double h_;
  std::vector<double> values_;
};

/// phi_h(i) = (1/h) * integral of beta over [ih, (i+1)h] for i < K.
/// Constant beta gives exactly 1; the other families are integrated exactly.
inline PhiSequence compute_phi(const DiscountSpec& spec, double h, std::size_t K) {
  if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("compute_phi needs h > 0");
  if (K == 0) throw DomainError("compute_phi needs K >= 1");
  std::vector<double> values(K);
  if (spec.is_constant()) {
    std::fill(values.begin(), values.end(), 1.0);
  } else if (const auto* hyp = std::get_if<HyperbolicDiscount>(&spec.family())) {
    for (std::size_t i = 0; i < K; ++i)
      values[i] = detail::hyperbolic_integral(*hyp, static_cast<double>(i) * h, h) / h;
  } else {
    const auto& tab = std::get<TabulatedDiscount>(spec.family());
    for (std::size_t i = 0; i < K; ++i) {
      const double a = static_cast<double>(i) * h;
      values[i] = detail::tabulated_integral(tab, a, a + h) / h;
    }
  }
  for (std::size_t i = 0; i < K; ++i) {
    if (!std::isfinite(values[i]) || !(values[i] > 0.0)) {
      std::ostringstream os;
      os << "phi_h(" << i << ") = " << values[i] << " is not a positive finite number";
      throw NumericError(os.str());
    }
  }
  return PhiSequence(h, std::move(values));
}

/// Slack used for every supermultiplicativity comparison.
inline constexpr double kSupermultiplicativeSlack = 1e-12;

/// Status of the requirement that beta has a divergent integral over [0, inf).
enum class IntegralStatus { AnalyticallyVerified, AnalyticallyViolated, Unverifiable };

struct DiscountValidation : ValidationReport {
  IntegralStatus divergent_integral = IntegralStatus::Unverifiable;
};

/// Checks beta(0) = 1, range, monotonicity and supermultiplicativity on the sample grid.
inline DiscountValidation validate_discount(const DiscountSpec& spec,
                                            std::span<const double> grid) {
  DiscountValidation report;
  if (grid.empty() || !std::is_sorted(grid.begin(), grid.end()) || grid.front() < 0.0) {
    report.add("grid", false, "sample grid must be nonempty, sorted and nonnegative");
    return report;
  }
  const double end = spec.domain_end();
  std::vector<double> ts;
  for (double t : grid)
    if (t <= end) ts.push_back(t);
  std::vector<double> values;
  values.reserve(ts.size());
  for (double t : ts) values.push_back(eval_beta(spec, t));

  const double b0 = eval_beta(spec, 0.0);
  report.add("beta(0)=1", b0 == 1.0, b0 == 1.0 ? "" : "beta(0) = " + std::to_string(b0));

  bool range_ok = true;
  std::string range_detail;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (!(values[i] > 0.0) || values[i] > 1.0) {
      range_ok = false;
      range_detail = "beta(" + std::to_string(ts[i]) + ") = " + std::to_string(values[i]);
      break;
    }
  }
  report.add("range (0,1]", range_ok, range_detail);

  bool mono_ok = true;
  std::string mono_detail;
  for (std::size_t i = 1; i < ts.size(); ++i) {
    if (values[i] > values[i - 1]) {
      mono_ok = false;
      mono_detail = "beta increases between t=" + std::to_string(ts[i - 1]) + " and t=" +
                    std::to_string(ts[i]);
      break;
    }
  }
  report.add("non-increasing", mono_ok, mono_detail);

  bool super_ok = true;
  std::string super_detail;
  for (std::size_t i = 0; i < ts.size() && super_ok; ++i) {
    for (std::size_t j = i; j < ts.size(); ++j) {
      const double sum = ts[i] + ts[j];
      if (sum > end) break;
      const double lhs = eval_beta(spec, sum);
      const double rhs = values[i] * values[j];
      if (lhs < rhs - kSupermultiplicativeSlack) {
        super_ok = false;
        std::ostringstream os;
        os << "beta(" << sum << ") = " << lhs << " < beta(" << ts[i] << ")*beta(" << ts[j]
           << ") = " << rhs;
        super_detail = os.str();
        break;
      }
    }
  }
  report.add("supermultiplicative", super_ok, super_detail);

  std::visit(
      [&report](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, ConstantDiscount>) {
          report.divergent_integral = IntegralStatus::AnalyticallyVerified;
        } else if constexpr (std::is_same_v<F, HyperbolicDiscount>) {
          report.divergent_integral = f.exponent <= 1.0 ? IntegralStatus::AnalyticallyVerified
                                                        : IntegralStatus::AnalyticallyViolated;
        } else {
          report.divergent_integral = IntegralStatus::Unverifiable;
        }
      },
      spec.family());
  report.add("divergent integral",
             report.divergent_integral != IntegralStatus::AnalyticallyViolated,
             report.divergent_integral == IntegralStatus::Unverifiable
                 ? "unverifiable by sampling"
                 : (report.divergent_integral == IntegralStatus::AnalyticallyViolated
                        ? "integral of beta is finite (exponent > 1)"
                        : "verified analytically"));
  return report;
}

/// Monotonicity, phi(0) <= 1, positivity and supermultiplicativity of a computed sequence.
inline ValidationReport check_phi_invariants(const PhiSequence& phi) {
  ValidationReport report;
  const auto v = phi.values();
  report.add("phi(0)<=1", v.empty() || v[0] <= 1.0 + 1e-15);
  bool positive = std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; });
  report.add("positive", positive);
  bool mono = true;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) {
      mono = false;
      report.add("non-increasing detail", false, "phi(" + std::to_string(i) + ") > phi(" +
                                                     std::to_string(i - 1) + ")");
      break;
    }
  report.add("non-increasing", mono);
  bool super = true;
  for (std::size_t i = 0; i < v.size() && super; ++i)
    for (std::size_t k = i; i + k < v.size(); ++k)
      if (v[i + k] < v[i] * v[k] - kSupermultiplicativeSlack) {
        super = false;
        report.add("supermultiplicative detail", false,
                   "phi(" + std::to_string(i + k) + ") < phi(" + std::to_string(i) + ")*phi(" +
                       std::to_string(k) + ")");
        break;
      }
  report.add("supermultiplicative", super);
  return report;
}

}  // namespace impulse
