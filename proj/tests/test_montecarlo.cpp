#include <gtest/gtest.h>

#include <cmath>

#include "impulse/montecarlo.hpp"
#include "impulse/stationary.hpp"
#include "support/instances.hpp"

using namespace impulse;

namespace {

SimConfig small_config(std::size_t paths, std::size_t steps, std::uint64_t seed = 5) {
  SimConfig cfg;
  cfg.n_paths = paths;
  cfg.horizon_steps = steps;
  cfg.seed = seed;
  cfg.threads = 3;
  return cfg;
}

// Expected simulated functional at n steps by pushing the state law forward:
// running cost weighted by the cell integral of beta, impulses by beta at the grid time.
double expected_functional(const StationaryStrategy& s, const ImpulseModel& m, const DiscountSpec& beta,
                           std::size_t x0, std::size_t n_steps) {
  const double h = m.h();
  const std::size_t n = m.size();
  std::vector<double> law(n, 0.0);
  double num = 0.0;
  if (s.continues(x0)) {
    law[x0] = 1.0;
  } else {
    law[s.shift(x0)] = 1.0;
    num += m.shift_cost(x0, s.shift(x0));
  }
  double den = 0.0;
  for (std::size_t i = 0; i < n_steps; ++i) {
    const double cell = integrate_beta(beta, h * static_cast<double>(i), h * static_cast<double>(i + 1));
    den += cell;
    std::vector<double> next(n, 0.0);
    for (std::size_t y = 0; y < n; ++y) {
      num += cell * law[y] * m.g(y);
      for (std::size_t z = 0; z < n; ++z) {
        const double mass = law[y] * m.kernel().matrix(y, z);
        if (s.continues(z)) {
          next[z] += mass;
        } else {
          num += eval_beta(beta, h * static_cast<double>(i + 1)) * mass * m.shift_cost(z, s.shift(z));
          next[s.shift(z)] += mass;
        }
      }
    }
    law = next;
  }
  return num / den;
}

}  // namespace

TEST(PathSeeds, DependOnSeedAndPathOnly) {
  EXPECT_EQ(path_seed(1, 2), path_seed(1, 2));
  EXPECT_NE(path_seed(1, 2), path_seed(1, 3));
  EXPECT_NE(path_seed(1, 2), path_seed(2, 2));
  EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFULL);
}

TEST(Checkpoints, DefaultsAndValidation) {
  SimConfig cfg = small_config(10, 160);
  const auto cps = resolve_checkpoints(cfg);
  ASSERT_EQ(cps.size(), 16u);
  EXPECT_EQ(cps.front(), 10u);
  EXPECT_EQ(cps.back(), 160u);
  cfg.horizon_steps = 5;
  EXPECT_EQ(resolve_checkpoints(cfg), (std::vector<std::size_t>{1, 2, 3, 4, 5}));
  cfg.checkpoints = {3, 2};
  EXPECT_THROW(resolve_checkpoints(cfg), DomainError);
  cfg.checkpoints = {0, 2};
  EXPECT_THROW(resolve_checkpoints(cfg), DomainError);
  cfg.checkpoints = {6};
  EXPECT_THROW(resolve_checkpoints(cfg), DomainError);
  cfg.checkpoints.clear();
  cfg.fine_factor = 0;
  EXPECT_THROW(resolve_checkpoints(cfg), DomainError);
  cfg.fine_factor = 1;
  cfg.n_paths = 0;
  EXPECT_THROW(resolve_checkpoints(cfg), DomainError);
}

TEST(Simulation, ReproducibleAcrossThreadCounts) {
  const auto m = instances::random_model(6000);
  const auto s = StationaryStrategy::no_impulse(m.size());
  SimConfig cfg = small_config(200, 300);
  const auto a = simulate_undiscounted(s, m, cfg);
  cfg.threads = 1;
  const auto b = simulate_undiscounted(s, m, cfg);
  cfg.threads = 7;
  const auto c = simulate_undiscounted(s, m, cfg);
  EXPECT_EQ(a.path_values, b.path_values);
  EXPECT_EQ(a.path_values, c.path_values);
  EXPECT_EQ(a.mean, b.mean);
}

TEST(Simulation, PathValuesDoNotDependOnPathCount) {
  const auto m = instances::two_state();
  const auto s = StationaryStrategy::make(m.states(), {0}, {{1, 0}});
  const auto few = simulate_undiscounted(s, m, small_config(50, 100));
  const auto many = simulate_undiscounted(s, m, small_config(120, 100));
  for (std::size_t p = 0; p < 50; ++p) EXPECT_EQ(few.path_values[p], many.path_values[p]);
  const auto other_seed = simulate_undiscounted(s, m, small_config(50, 100, 6));
  EXPECT_NE(few.path_values, other_seed.path_values);
}

TEST(Simulation, SingleStateHasNoVariance) {
  auto states = StateSpace::make(1, {0});
  CostModel costs;
  costs.running = {2.5};
  costs.shift = Matrix::from_rows({{1.0}});
  costs.c0 = 1.0;
  const auto m = ImpulseModel::make(states, Kernel::make(0.5, Matrix::from_rows({{1.0}})), costs);
  const auto est = simulate_discounted(StationaryStrategy::no_impulse(1), m, DiscountSpec::hyperbolic(1.0, 0.5),
                                       small_config(30, 64));
  EXPECT_NEAR(est.mean, 2.5, 1e-14);
  EXPECT_EQ(est.std_error, 0.0);
}

TEST(Simulation, ConstantDiscountIsPathIdenticalToUndiscounted) {
  for (int trial = 0; trial < 5; ++trial) {
    const auto m = instances::random_model(6100 + trial);
    std::mt19937_64 rng(trial);
    const auto s = instances::random_strategy(rng, m.states());
    const auto cfg = small_config(100, 257);
    const auto a = simulate_undiscounted(s, m, cfg);
    const auto b = simulate_discounted(s, m, DiscountSpec::constant(), cfg);
    EXPECT_EQ(a.path_values, b.path_values);
  }
}

TEST(Simulation, AgreesWithExactExpectation) {
  const auto spec = DiscountSpec::hyperbolic(1.0, 0.5);
  for (int trial = 0; trial < 4; ++trial) {
    const auto m = instances::random_model(6200 + trial);
    std::mt19937_64 rng(100 + trial);
    const auto s = instances::random_strategy(rng, m.states());
    SimConfig cfg = small_config(20000, 40);
    cfg.threads = 0;
    cfg.checkpoints = {10, 40};
    const auto und = simulate_undiscounted(s, m, cfg);
    const auto dis = simulate_discounted(s, m, spec, cfg);
    for (std::size_t c = 0; c < 2; ++c) {
      const std::size_t n = cfg.checkpoints[c];
      const double eu = expected_functional(s, m, DiscountSpec::constant(), 0, n);
      const double ed = expected_functional(s, m, spec, 0, n);
      EXPECT_NEAR(und.per_checkpoint[c].mean, eu, 5.0 * und.per_checkpoint[c].std_error + 1e-12);
      EXPECT_NEAR(dis.per_checkpoint[c].mean, ed, 5.0 * dis.per_checkpoint[c].std_error + 1e-12);
    }
  }
}

TEST(Simulation, ConstantDiscountMatchesExactEvaluator) {
  const auto m = instances::two_state();
  const auto s = StationaryStrategy::make(m.states(), {0}, {{1, 0}});
  SimConfig cfg = small_config(4000, 50);
  cfg.initial_state = 1;
  const auto est = simulate_undiscounted(s, m, cfg);
  const auto exact = evaluate_discounted_exact(s, m, compute_phi(DiscountSpec::constant(), 1.0, 51), 1, 50);
  EXPECT_NEAR(est.mean, exact.value, 5.0 * est.std_error);
  EXPECT_NEAR(expected_functional(s, m, DiscountSpec::constant(), 1, 50), exact.value, 1e-13);
}

TEST(Simulation, FineFactorNeedsGenerator) {
  const auto m = instances::two_state();
  SimConfig cfg = small_config(10, 10);
  cfg.fine_factor = 4;
  EXPECT_THROW(simulate_undiscounted(StationaryStrategy::no_impulse(2), m, cfg), DomainError);
  cfg.fine_factor = 1;
  cfg.initial_state = 2;
  EXPECT_THROW(simulate_undiscounted(StationaryStrategy::no_impulse(2), m, cfg), DomainError);
  EXPECT_THROW(simulate_undiscounted(StationaryStrategy::no_impulse(3), m, small_config(10, 10)), StrategyError);
}

TEST(Simulation, FineCellsTrackTheContinuousRunningCost) {
  // Two-state CTMC with no impulses: E g(Y_t) is known in closed form.
  auto states = StateSpace::make(2, {0, 1});
  const auto gen = Generator::make(Matrix::from_rows({{-1.0, 1.0}, {1.0, -1.0}}));
  CostModel costs;
  costs.running = {0.0, 1.0};
  costs.shift = Matrix::from_rows({{1.0, 1.0}, {1.0, 1.0}});
  costs.c0 = 1.0;
  const auto m = ImpulseModel::make(states, kernel_from_generator(gen, 1.0), costs, gen);
  SimConfig cfg = small_config(40000, 2);
  cfg.fine_factor = 16;
  cfg.threads = 0;
  const auto est = simulate_undiscounted(StationaryStrategy::no_impulse(2), m, cfg);
  // P(Y_t = 1 | Y_0 = 0) = (1 - e^{-2t})/2, sampled at the left end of each fine cell.
  double exact = 0.0;
  for (int j = 0; j < 32; ++j) exact += 0.5 * (1.0 - std::exp(-2.0 * j / 16.0)) / 32.0;
  EXPECT_NEAR(est.mean, exact, 5.0 * est.std_error);
  EXPECT_NEAR(exact, 0.5 - (1.0 - std::exp(-4.0)) / 8.0, 0.01);
}

TEST(EpsilonReport, LadderOnTwoStateGenerator) {
  auto states = StateSpace::make(2, {0, 1});
  const auto gen = Generator::make(Matrix::from_rows({{-1.0, 1.0}, {1.0, -1.0}}));
  CostModel costs;
  costs.running = {0.0, 1.0};
  costs.shift = Matrix::from_rows({{0.5, 0.9}, {0.9, 0.5}});
  costs.c0 = 0.5;
  const auto m = ImpulseModel::make(states, kernel_from_generator(gen, 1.0), costs, gen);
  SimConfig cfg = small_config(400, 200);
  cfg.threads = 0;
  const auto report = epsilon_optimality_report(m, DiscountSpec::hyperbolic(1.0, 0.5), {1.0, 0.5}, cfg);
  ASSERT_EQ(report.rows.size(), 2u);
  EXPECT_EQ(report.rows[1].undiscounted.per_checkpoint.back().step, 400u);
  for (const auto& row : report.rows) {
    EXPECT_GT(row.lambda, 0.0);
    EXPECT_EQ(row.gap_undiscounted, std::abs(row.undiscounted.mean - row.lambda));
  }
  EXPECT_THROW(epsilon_optimality_report(m, DiscountSpec::constant(), {0.5, 1.0}, cfg), DomainError);
  EXPECT_THROW(epsilon_optimality_report(m, DiscountSpec::constant(), {}, cfg), DomainError);
}
