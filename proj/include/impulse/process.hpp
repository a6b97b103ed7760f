#pragma once

// Finite-state Markov dynamics: state space, one-step kernels, CTMC generators,
// Doeblin coefficient and invariant law.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "impulse/errors.hpp"
#include "impulse/linalg.hpp"

namespace impulse {

inline constexpr double kStochasticTolerance = 1e-12;

/// States 0..n-1 with labels, optional coordinates, and the after-impulse set U.
class StateSpace {
 public:
  StateSpace() = default;

  /// Labels default to "0".."n-1". Targets are sorted and deduplicated.
  static StateSpace make(std::size_t n, std::vector<std::size_t> targets,
                         std::vector<std::string> labels = {},
                         std::vector<std::vector<double>> coords = {}) {
    if (n == 0) throw DomainError("state space must have at least one state");
    if (labels.empty()) {
      for (std::size_t i = 0; i < n; ++i) labels.push_back(std::to_string(i));
    }
    if (labels.size() != n) throw ShapeError("label count does not match number of states");
    std::set<std::string> seen(labels.begin(), labels.end());
    if (seen.size() != labels.size()) throw DomainError("state labels must be distinct");
    if (!coords.empty()) {
      if (coords.size() != n) throw ShapeError("coordinate count does not match number of states");
      for (const auto& c : coords)
        if (c.size() != coords.front().size())
          throw ShapeError("coordinates must share one dimension");
    }
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    if (targets.empty()) throw DomainError("impulse target set U must be nonempty");
    if (targets.back() >= n) throw DomainError("impulse target index out of range");
    StateSpace s;
    s.labels_ = std::move(labels);
    s.coords_ = std::move(coords);
    s.targets_ = std::move(targets);
    s.column_.assign(n, -1);
    for (std::size_t j = 0; j < s.targets_.size(); ++j)
      s.column_[s.targets_[j]] = static_cast<long>(j);
    return s;
  }

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<std::vector<double>>& coords() const noexcept { return coords_; }
  bool has_coords() const noexcept { return !coords_.empty(); }
  const std::vector<std::size_t>& targets() const noexcept { return targets_; }
  bool is_target(std::size_t x) const { return column_.at(x) >= 0; }

  /// Column of state xi in an |E| x |U| table.
  std::size_t target_column(std::size_t xi) const {
    const long c = column_.at(xi);
    if (c < 0) throw DomainError("state " + std::to_string(xi) + " is not an impulse target");
    return static_cast<std::size_t>(c);
  }

 private:
  std::vector<std::string> labels_;
  std::vector<std::vector<double>> coords_;
  std::vector<std::size_t> targets_;
  std::vector<long> column_;
};

/// One-step transition kernel P_h over grid step h.
struct Kernel {
  double h = 1.0;
  Matrix matrix;

  std::size_t size() const noexcept { return matrix.rows(); }

  /// Square, entries in [0,1], rows summing to one within 1e-12.
  static Kernel make(double h, Matrix m) {
    if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("kernel step h must be positive");
    if (m.rows() == 0 || m.rows() != m.cols()) throw ShapeError("kernel must be square");
    if (!m.all_finite()) throw NumericError("kernel has non-finite entries");
    for (std::size_t i = 0; i < m.rows(); ++i) {
      double sum = 0.0;
      for (double p : m.row(i)) {
        if (p < 0.0 || p > 1.0)
          throw DomainError("kernel row " + std::to_string(i) + " has an entry outside [0,1]");
        sum += p;
      }
      if (std::abs(sum - 1.0) > kStochasticTolerance) {
        std::ostringstream os;
        os << "kernel row " << i << " sums to " << sum;
        throw DomainError(os.str());
      }
    }
    return Kernel{h, std::move(m)};
  }
};

/// Continuous-time rate matrix Q.
struct Generator {
  Matrix rates;

  std::size_t size() const noexcept { return rates.rows(); }

  static Generator make(Matrix q) {
    if (q.rows() == 0 || q.rows() != q.cols()) throw ShapeError("generator must be square");
    if (!q.all_finite()) throw NumericError("generator has non-finite entries");
    for (std::size_t i = 0; i < q.rows(); ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < q.cols(); ++j) {
        if (i != j && q(i, j) < 0.0)
          throw DomainError("generator has a negative off-diagonal rate in row " +
                            std::to_string(i));
        sum += q(i, j);
      }
      if (q(i, i) > 0.0) throw DomainError("generator diagonal must be nonpositive");
      if (std::abs(sum) > kStochasticTolerance)
        throw DomainError("generator row " + std::to_string(i) + " does not sum to zero");
    }
    return Generator{std::move(q)};
  }
};

namespace detail {

inline Matrix uniformized_exponential(const Matrix& q, double h) {
  const std::size_t n = q.rows();
  double rate = 0.0;
  for (std::size_t i = 0; i < n; ++i) rate = std::max(rate, -q(i, i));
  if (rate == 0.0) return Matrix::identity(n);

  const double mean = rate * h;
  // exp(-mean) underflows past ~745; split the step and square.
  if (mean > 500.0) {
    const Matrix half = uniformized_exponential(q, 0.5 * h);
    return half * half;
  }

  Matrix jump(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) jump(i, j) = (i == j ? 1.0 : 0.0) + q(i, j) / rate;

  Matrix power = Matrix::identity(n);
  Matrix result(n, n);
  double weight = std::exp(-mean);
  double accumulated = 0.0;
  for (std::size_t k = 0;; ++k) {
    if (k > 0) {
      power = power * jump;
      weight *= mean / static_cast<double>(k);
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) result(i, j) += weight * power(i, j);
    accumulated += weight;
    if (1.0 - accumulated < 1e-12 && static_cast<double>(k) >= mean) break;
    if (k > 100000) throw NumericError("uniformization did not reach the tail bound");
  }
  return result;
}

}  // namespace detail

/// exp(hQ) by uniformization, truncated once the Poisson tail mass is below 1e-12.
inline Kernel kernel_from_generator(const Generator& gen, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("kernel step h must be positive");
  Matrix m = detail::uniformized_exponential(gen.rates, h);
  if (!m.all_finite()) throw NumericError("uniformization produced non-finite entries");
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = std::clamp(m(i, j), 0.0, 1.0);
  return Kernel{h, std::move(m)};
}

/// max over state pairs of the total-variation distance between their rows.
inline double doeblin_coefficient(const Matrix& p) {
  double worst = 0.0;
  for (std::size_t x = 0; x < p.rows(); ++x) {
    for (std::size_t y = x + 1; y < p.rows(); ++y) {
      double tv = 0.0;
      for (std::size_t z = 0; z < p.cols(); ++z) tv += std::abs(p(x, z) - p(y, z));
      worst = std::max(worst, 0.5 * tv);
    }
  }
  return std::min(worst, 1.0);
}

inline double doeblin_coefficient(const Kernel& k) { return doeblin_coefficient(k.matrix); }

/// Invariant law pi = pi P by power iteration from the uniform law (L1 step < 1e-13).
inline std::vector<double> stationary_distribution(const Matrix& p) {
  const double coefficient = doeblin_coefficient(p);
  if (!(coefficient < 1.0))
    throw ErgodicityError("kernel is not uniformly ergodic (Doeblin coefficient 1)", coefficient);
  const std::size_t n = p.rows();
  std::vector<double> pi(n, 1.0 / static_cast<double>(n));
  for (std::size_t it = 0; it < 10'000'000; ++it) {
    std::vector<double> next = left_apply(pi, p);
    double total = 0.0;
    for (double v : next) total += v;
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] /= total;
      change += std::abs(next[i] - pi[i]);
    }
    pi = std::move(next);
    if (change < 1e-13) return pi;
  }
  throw ConvergenceError("stationary distribution power iteration did not converge", 0.0);
}

inline std::vector<double> stationary_distribution(const Kernel& k) {
  return stationary_distribution(k.matrix);
}

}  // namespace impulse
