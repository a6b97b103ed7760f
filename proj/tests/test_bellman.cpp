#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "impulse/bellman.hpp"
#include "impulse/stationary.hpp"
#include "support/instances.hpp"

using namespace impulse;

namespace {

ImpulseModel with_running(const ImpulseModel& m, std::vector<double> g) {
  CostModel costs = m.costs();
  costs.running = std::move(g);
  return ImpulseModel::make(m.states(), m.kernel(), costs);
}

}  // namespace

TEST(ApplyM, TwoStateValues) {
  const auto model = instances::two_state();
  const std::vector<double> zero{0.0, 0.0};
  const auto m0 = apply_M(model, zero);
  EXPECT_DOUBLE_EQ(m0.value[0], 0.5);
  EXPECT_DOUBLE_EQ(m0.value[1], 0.5);
  EXPECT_EQ(m0.argmin[0], 0u);
  EXPECT_EQ(m0.argmin[1], 1u);

  const std::vector<double> w{0.0, 1.0};
  const auto m1 = apply_M(model, w);
  EXPECT_DOUBLE_EQ(m1.value[0], 0.5);
  EXPECT_DOUBLE_EQ(m1.value[1], 0.9);
  EXPECT_EQ(m1.argmin[1], 0u);

  const auto scaled = apply_M(model, w, 0.5);
  EXPECT_DOUBLE_EQ(scaled.value[1], 0.45);
}

TEST(SolveUndiscounted, TwoStateInstance) {
  const auto model = instances::two_state();
  const auto sol = solve_undiscounted(model);
  EXPECT_NEAR(sol.lambda, 0.09, 1e-9);
  EXPECT_EQ(sol.w[kReferenceState], 0.0);
  EXPECT_DOUBLE_EQ(sol.contraction_factor, model.contraction());
  const auto s = extract_strategy(sol, model);
  EXPECT_EQ(s.continuation_set(), (std::vector<std::size_t>{0}));
  EXPECT_EQ(s.shift(1), 0u);
  EXPECT_LE(bellman_residual(model, sol.w, sol.lambda), 1e-9);
}

TEST(SolveUndiscounted, ExpensiveImpulsesMeanNoIntervention) {
  const auto model = instances::two_state(100.0);
  const auto sol = solve_undiscounted(model);
  EXPECT_NEAR(sol.lambda, 1.0 / 3.0, 1e-9);
  const auto s = extract_strategy(sol, model);
  EXPECT_EQ(s, StationaryStrategy::no_impulse(2));
}

TEST(SolveUndiscounted, ConstantRunningCost) {
  const auto base = instances::random_model(77);
  const auto model = with_running(base, std::vector<double>(base.size(), 1.25));
  const auto sol = solve_undiscounted(model);
  EXPECT_NEAR(sol.lambda, 1.25, 1e-9);
  EXPECT_EQ(extract_strategy(sol, model), StationaryStrategy::no_impulse(model.size()));
}

TEST(SolveUndiscounted, SingleTargetShiftsTheCostlyState) {
  auto states = StateSpace::make(2, {0});
  auto kernel = Kernel::make(1.0, Matrix::from_rows({{0.9, 0.1}, {0.2, 0.8}}));
  CostModel costs;
  costs.running = {0.0, 10.0};
  costs.shift = Matrix::from_rows({{1.0}, {1.0}});
  costs.c0 = 1.0;
  const auto model = ImpulseModel::make(states, kernel, costs);
  const auto sol = solve_undiscounted(model);
  EXPECT_NEAR(sol.lambda, 0.1, 1e-9);
  const auto s = extract_strategy(sol, model);
  EXPECT_TRUE(s.continues(0));
  EXPECT_FALSE(s.continues(1));
  EXPECT_EQ(s.shift(1), 0u);
}

TEST(SolveUndiscounted, RejectsNonErgodicAndBadTolerance) {
  auto states = StateSpace::make(2, {0, 1});
  CostModel costs;
  costs.running = {0.0, 1.0};
  costs.shift = Matrix::from_rows({{1.0, 1.0}, {1.0, 1.0}});
  costs.c0 = 1.0;
  const auto frozen = ImpulseModel::make(states, Kernel::make(1.0, Matrix::identity(2)), costs);
  EXPECT_THROW(solve_undiscounted(frozen), ErgodicityError);
  EXPECT_THROW(solve_undiscounted(instances::two_state(), SolverOptions{0.0}), DomainError);
  EXPECT_THROW(solve_undiscounted(instances::random_model(3), SolverOptions{1e-14, 2}), ConvergenceError);
}

// span(v_{t+1} - v_t) shrinks at least geometrically with rate Lambda.
TEST(SolveUndiscounted, SpansContractAtDoeblinRate) {
  for (int trial = 0; trial < 30; ++trial) {
    const auto model = instances::random_model(300 + trial);
    const auto sol = solve_undiscounted(model);
    ASSERT_GE(sol.spans.size(), 1u);
    for (std::size_t t = 1; t < sol.spans.size(); ++t)
      EXPECT_LE(sol.spans[t], sol.contraction_factor * sol.spans[t - 1] * (1 + 1e-9) + 1e-13)
          << "seed " << 300 + trial << " t " << t;
    EXPECT_LE(sol.spans.back(), sol.stop_threshold);
  }
}

TEST(SolveUndiscounted, AgreesWithBruteForceOracle) {
  for (int trial = 0; trial < 25; ++trial) {
    instances::Options opt;
    opt.min_states = 2;
    opt.max_states = trial < 20 ? 6 : 8;
    opt.min_targets = 1;
    const auto model = instances::random_model(500 + trial, opt);
    const auto sol = solve_undiscounted(model);
    const auto best = brute_force_optimum(model);
    EXPECT_NEAR(sol.lambda, best.lambda_star, 1e-6) << "seed " << 500 + trial;
    const auto s = extract_strategy(sol, model);
    EXPECT_NEAR(evaluate_undiscounted_exact(s, model), best.lambda_star, 1e-6);
  }
}

TEST(SolveUndiscounted, ShiftingRunningCostShiftsLambdaOnly) {
  for (int trial = 0; trial < 10; ++trial) {
    const auto model = instances::random_model(700 + trial);
    std::vector<double> g = model.costs().running;
    for (double& v : g) v += 3.5;
    const auto shifted = with_running(model, g);
    const auto a = solve_undiscounted(model);
    const auto b = solve_undiscounted(shifted);
    EXPECT_NEAR(b.lambda, a.lambda + 3.5, 1e-9);
    for (std::size_t x = 0; x < model.size(); ++x) EXPECT_NEAR(b.w[x], a.w[x], 1e-8);
    EXPECT_EQ(extract_strategy(a, model), extract_strategy(b, shifted));
  }
}

TEST(ExtractStrategy, DegenerateTieIsReported) {
  const auto model = instances::two_state();
  const auto sol = solve_undiscounted(model);
  // A tie tolerance larger than every gap puts every state outside D.
  EXPECT_THROW(extract_strategy(sol, model, 1e3), DegenerateTieError);
}

TEST(ExtractStrategy, RefusesInaccurateSolution) {
  const auto model = instances::two_state();
  auto sol = solve_undiscounted(model);
  sol.residual = 1e-3;
  EXPECT_THROW(extract_strategy(sol, model, 1e-9), DomainError);
}

TEST(MartingaleDrift, HoldsAtTheSolution) {
  for (int trial = 0; trial < 20; ++trial) {
    const auto model = instances::random_model(900 + trial);
    const auto sol = solve_undiscounted(model, SolverOptions{1e-12});
    const auto report = check_martingale_drift(sol, model, 1e-8);
    EXPECT_TRUE(report.ok()) << "seed " << 900 + trial << " min drift " << report.min_drift;
  }
}

TEST(MartingaleDrift, FlagsInjectedFault) {
  const double tol = 1e-8;
  const auto model = instances::two_state();
  auto sol = solve_undiscounted(model, SolverOptions{1e-12});
  ASSERT_TRUE(check_martingale_drift(sol, model, tol).ok());
  sol.lambda += 10.0 * tol;
  const auto report = check_martingale_drift(sol, model, tol);
  ASSERT_FALSE(report.ok());
  EXPECT_TRUE(report.violations.front().continuation || report.violations.front().drift < -tol);
}

TEST(SolveDiscounted, ConstantDiscountReproducesUndiscounted) {
  for (int trial = 0; trial < 10; ++trial) {
    const auto model = instances::random_model(1100 + trial);
    const auto und = solve_undiscounted(model, SolverOptions{1e-12});
    const auto dis = solve_discounted(model, DiscountSpec::constant(), 64, 1e-11);
    for (std::size_t k = 0; k < dis.horizon; ++k) {
      EXPECT_NEAR(dis.lambda[k], und.lambda, 1e-9);
      for (std::size_t x = 0; x < model.size(); ++x) EXPECT_NEAR(dis.w(k, x), und.w[x], 1e-8);
    }
    EXPECT_LE(dis.residual, 1e-12);
  }
}

TEST(SolveDiscounted, TwoStateHyperbolicGauge) {
  const auto model = instances::two_state();
  const auto spec = DiscountSpec::hyperbolic(1.0, 1.0);
  const auto sol = solve_discounted(model, spec, 128);
  for (std::size_t k = 0; k < sol.horizon; ++k) EXPECT_EQ(sol.w(k, kReferenceState), 0.0);
  EXPECT_EQ(sol.boundary.size(), model.size());
  EXPECT_LE(sol.residual, 1e-12);
  EXPECT_LE(sol.truncation_bound, 1e-10);
  const auto phi = compute_phi(spec, 1.0, sol.horizon + sol.buffer);
  EXPECT_TRUE(check_martingale_drift(sol, model, phi, 1e-8).ok());
}

// Retained rows do not depend on how far the horizon extends past them.
TEST(SolveDiscounted, LongerHorizonLeavesRetainedRowsUnchanged) {
  const auto spec = DiscountSpec::hyperbolic(0.5, 0.8);
  for (int trial = 0; trial < 5; ++trial) {
    const auto model = instances::random_model(1300 + trial);
    const auto a = solve_discounted(model, spec, 64, 1e-10);
    const auto b = solve_discounted(model, spec, 128, 1e-10);
    for (std::size_t k = 0; k < 64; ++k) {
      EXPECT_NEAR(a.lambda[k], b.lambda[k], 1e-9);
      for (std::size_t x = 0; x < model.size(); ++x) EXPECT_NEAR(a.w(k, x), b.w(k, x), 1e-9);
    }
  }
}

TEST(SolveDiscounted, BufferGrowsWithPrecision) {
  const auto model = instances::two_state();
  const auto loose = discounted_buffer(model, 1e-4);
  const auto tight = discounted_buffer(model, 1e-12);
  EXPECT_GT(tight, loose);
  EXPECT_LE(std::pow(model.contraction(), static_cast<double>(tight)) * 2.0 * (1.0 + 0.9) / (1.0 - 0.7), 1e-12);
}

TEST(SolveDiscounted, ValidatesArguments) {
  const auto model = instances::two_state();
  EXPECT_THROW(solve_discounted(model, compute_phi(DiscountSpec::constant(), 1.0, 10), 8), DomainError);
  EXPECT_THROW(solve_discounted(model, compute_phi(DiscountSpec::constant(), 0.5, 500), 8), DomainError);
  EXPECT_THROW(solve_discounted(model, DiscountSpec::constant(), 0), DomainError);
}

TEST(SolveDiscounted, WeightedLambdaOfConstantDiscount) {
  const auto model = instances::two_state();
  const auto phi = compute_phi(DiscountSpec::constant(), 1.0, 200);
  const auto sol = solve_discounted(model, phi, 32);
  EXPECT_NEAR(weighted_lambda(sol, phi, 32), 0.09, 1e-9);
  EXPECT_THROW(weighted_lambda(sol, phi, 0), DomainError);
  EXPECT_THROW(weighted_lambda(sol, phi, 33), DomainError);
}

TEST(MartingaleDrift, DiscountedFlagsInjectedFault) {
  const double tol = 1e-8;
  const auto model = instances::random_model(1500);
  const auto spec = DiscountSpec::hyperbolic(1.0, 0.5);
  auto sol = solve_discounted(model, spec, 16, 1e-12);
  const auto phi = compute_phi(spec, model.h(), sol.horizon + sol.buffer);
  ASSERT_TRUE(check_martingale_drift(sol, model, phi, tol).ok());
  sol.w(5, 1) += 10.0 * tol;
  const auto report = check_martingale_drift(sol, model, phi, tol);
  ASSERT_FALSE(report.ok());
  bool found = false;
  for (const auto& v : report.violations) found |= (v.k == 5 && v.x == 1);
  EXPECT_TRUE(found);
}
