#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "impulse/costs.hpp"
#include "impulse/errors.hpp"
#include "impulse/process.hpp"

namespace impulse {

/// A validated impulse control problem at one grid step h.
class ImpulseModel {
 public:
  /// Rejects shape mismatches and cost tables violating positivity or the triangle inequality.
  /// Ergodicity is recorded, not enforced here; the solvers enforce it.
  static ImpulseModel make(StateSpace states, Kernel kernel, CostModel costs,
                           std::optional<Generator> generator = std::nullopt) {
    if (kernel.size() != states.size())
      throw ShapeError("kernel size does not match the state space");
    if (generator && generator->size() != states.size())
      throw ShapeError("generator size does not match the state space");
    const auto report = validate_costs(costs, states);
    if (!report.ok()) {
      std::string msg = "cost model violates its assumptions:";
      for (const auto& c : report.checks)
        if (!c.passed) msg += " [" + c.name + ": " + c.detail + "]";
      throw DomainError(msg);
    }
    ImpulseModel m;
    m.states_ = std::move(states);
    m.kernel_ = std::move(kernel);
    m.costs_ = std::move(costs);
    m.generator_ = std::move(generator);
    m.contraction_ = doeblin_coefficient(m.kernel_);
    return m;
  }

  /// Same states, costs and generator; kernel exp(hQ) for a new step h.
  ImpulseModel at_step(double h) const {
    if (!generator_) throw DomainError("changing the grid step requires a generator");
    return make(states_, kernel_from_generator(*generator_, h), costs_, generator_);
  }

  const StateSpace& states() const noexcept { return states_; }
  const Kernel& kernel() const noexcept { return kernel_; }
  const CostModel& costs() const noexcept { return costs_; }
  const std::optional<Generator>& generator() const noexcept { return generator_; }
  std::size_t size() const noexcept { return states_.size(); }
  double h() const noexcept { return kernel_.h; }
  /// Doeblin coefficient Lambda_h of the kernel.
  double contraction() const noexcept { return contraction_; }

  double g(std::size_t x) const { return costs_.running[x]; }
  /// c(x, xi) for xi in U.
  double shift_cost(std::size_t x, std::size_t xi) const {
    return costs_.shift_cost(states_, x, xi);
  }

  void require_ergodic() const {
    if (!(contraction_ < 1.0))
      throw ErgodicityError("model kernel has Doeblin coefficient 1; no span contraction",
                            contraction_);
  }

 private:
  StateSpace states_;
  Kernel kernel_;
  CostModel costs_;
  std::optional<Generator> generator_;
  double contraction_ = 1.0;
};

}  // namespace impulse
