#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "impulse/costs.hpp"
#include "support/instances.hpp"

using namespace impulse;

namespace {

CostModel make_costs(std::vector<double> g, std::vector<std::vector<double>> c, double c0) {
  CostModel m;
  m.running = std::move(g);
  m.shift = Matrix::from_rows(c);
  m.c0 = c0;
  return m;
}

// Exhaustive triangle check written out directly.
bool triangle_holds(const CostModel& m, const StateSpace& s) {
  for (std::size_t x = 0; x < s.size(); ++x)
    for (std::size_t eta : s.targets())
      for (std::size_t xi : s.targets())
        if (m.shift_cost(s, x, xi) > m.shift_cost(s, x, eta) + m.shift_cost(s, eta, xi) + 1e-12) return false;
  return true;
}

}  // namespace

TEST(ValidateCosts, TwoStateCostPasses) {
  const auto s = StateSpace::make(2, {0, 1});
  const auto r = validate_costs(make_costs({0, 1}, {{0.5, 0.9}, {0.9, 0.5}}, 0.5), s);
  EXPECT_TRUE(r.ok());
  EXPECT_DOUBLE_EQ(r.tightest_c0, 0.5);
}

TEST(ValidateCosts, ConstantCostPasses) {
  const auto s = StateSpace::make(3, {0, 2});
  const auto r = validate_costs(make_costs({0, 1, 2}, {{1, 1}, {1, 1}, {1, 1}}, 1.0), s);
  EXPECT_TRUE(r.ok());
  EXPECT_DOUBLE_EQ(r.tightest_c0, 1.0);
}

TEST(ValidateCosts, ZeroEntryFailsPositivity) {
  const auto s = StateSpace::make(2, {0, 1});
  const auto r = validate_costs(make_costs({0, 1}, {{0.0, 0.9}, {0.9, 0.5}}, 0.5), s);
  EXPECT_FALSE(r.ok());
  EXPECT_FALSE(r.find("c >= c0 > 0")->passed);
  EXPECT_EQ(r.tightest_c0, 0.0);
  ASSERT_FALSE(r.violations.empty());
  EXPECT_TRUE(r.violations.front().positivity);
}

TEST(ValidateCosts, ReportsEveryTriangleViolation) {
  const auto s = StateSpace::make(3, {0, 1, 2});
  // c(0,2) = 5 > c(0,1) + c(1,2) = 2 is the only shortcut.
  const auto m = make_costs({0, 0, 0}, {{1, 1, 5}, {1, 1, 1}, {1, 1, 1}}, 1.0);
  const auto r = validate_costs(m, s);
  EXPECT_FALSE(r.find("triangle inequality")->passed);
  std::size_t triangle = 0;
  for (const auto& v : r.violations)
    if (!v.positivity) {
      ++triangle;
      EXPECT_EQ(v.x, 0u);
      EXPECT_EQ(v.via, 1u);
      EXPECT_EQ(v.target, 2u);
      EXPECT_DOUBLE_EQ(v.excess, 3.0);
    }
  EXPECT_EQ(triangle, 1u);
}

TEST(ValidateCosts, ShapeMismatchThrows) {
  const auto s = StateSpace::make(2, {0});
  EXPECT_THROW(validate_costs(make_costs({0, 1, 2}, {{1}, {1}}, 1.0), s), ShapeError);
  EXPECT_THROW(validate_costs(make_costs({0, 1}, {{1, 1}, {1, 1}}, 1.0), s), ShapeError);
}

TEST(ValidateCosts, NonFiniteInputsFail) {
  const auto s = StateSpace::make(2, {0});
  EXPECT_FALSE(validate_costs(make_costs({0, NAN}, {{1}, {1}}, 1.0), s).ok());
  EXPECT_FALSE(validate_costs(make_costs({0, 1}, {{1}, {INFINITY}}, 1.0), s).ok());
}

TEST(ValidateCosts, RandomClosedCostsPass) {
  for (int trial = 0; trial < 50; ++trial) {
    const auto model = instances::random_model(1000 + trial);
    const auto r = validate_costs(model.costs(), model.states());
    EXPECT_TRUE(r.ok());
    EXPECT_TRUE(triangle_holds(model.costs(), model.states()));
  }
}

TEST(SubadditiveTable, ValidatesAndInterpolates) {
  EXPECT_THROW(SubadditiveTable::make({}), ConstructionError);
  EXPECT_THROW(SubadditiveTable::make({{0.0, 0.1}}), ConstructionError);
  EXPECT_THROW(SubadditiveTable::make({{0.0, 0.0}, {1.0, 0.5}, {0.5, 0.6}}), ConstructionError);
  EXPECT_THROW(SubadditiveTable::make({{0.0, 0.0}, {1.0, 0.5}, {2.0, 0.4}}), ConstructionError);
  const auto t = SubadditiveTable::make({{0.0, 0.0}, {1.0, 1.0}});
  EXPECT_DOUBLE_EQ(t(0.25), 0.25);
  EXPECT_DOUBLE_EQ(t(7.0), 1.0);
  EXPECT_DOUBLE_EQ(t(-1.0), 0.0);
}

TEST(MetricCost, ZeroFunctionGivesConstantCost) {
  const auto s = StateSpace::make(3, {0, 1}, {}, {{0.0}, {1.0}, {5.0}});
  const auto m = metric_cost(s, {0, 0, 0}, SubadditiveTable::make({{0.0, 0.0}}), 0.3);
  for (double v : m.shift.data()) EXPECT_DOUBLE_EQ(v, 0.3);
}

TEST(MetricCost, CappedDistanceOnALine) {
  const auto s = StateSpace::make(3, {0, 1, 2}, {}, {{0.0}, {1.0}, {2.0}});
  const auto h = SubadditiveTable::make({{0.0, 0.0}, {1.0, 1.0}});  // min(d, 1)
  const auto m = metric_cost(s, {0, 0, 0}, h, 0.1);
  EXPECT_DOUBLE_EQ(m.shift_cost(s, 0, 2), 1.1);
  EXPECT_DOUBLE_EQ(m.shift_cost(s, 0, 1) + m.shift_cost(s, 1, 2), 2.2);
  EXPECT_TRUE(validate_costs(m, s).ok());
}

TEST(MetricCost, SquareRootOnRandomCloudPassesExhaustiveCheck) {
  std::vector<std::pair<double, double>> knots;
  for (int i = 0; i <= 400; ++i) knots.emplace_back(0.025 * i, std::sqrt(0.025 * i));
  const auto h = SubadditiveTable::make(knots);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::vector<std::vector<double>> coords(6);
  for (auto& c : coords) c = {u(rng), u(rng)};
  const auto s = StateSpace::make(6, {0, 2, 3, 5}, {}, coords);
  const auto m = metric_cost(s, std::vector<double>(6, 0.0), h, 0.2);
  EXPECT_TRUE(validate_costs(m, s).ok());
  EXPECT_TRUE(triangle_holds(m, s));
}

TEST(MetricCost, RejectsSuperadditiveFunction) {
  const auto s = StateSpace::make(3, {0, 1}, {}, {{0.0}, {1.0}, {2.0}});
  const auto convex = SubadditiveTable::make({{0.0, 0.0}, {1.0, 0.1}, {2.0, 1.0}});
  EXPECT_THROW(metric_cost(s, {0, 0, 0}, convex, 0.1), ConstructionError);
  const auto no_coords = StateSpace::make(3, {0});
  EXPECT_THROW(metric_cost(no_coords, {0, 0, 0}, SubadditiveTable::make({{0.0, 0.0}}), 0.1), ConstructionError);
  EXPECT_THROW(metric_cost(s, {0, 0, 0}, SubadditiveTable::make({{0.0, 0.0}}), 0.0), ConstructionError);
}

// Positive costs with the triangle inequality make a double impulse never cheaper than a single one.
TEST(CostProperties, DoubleImpulsesAreNeverCheaper) {
  for (int trial = 0; trial < 50; ++trial) {
    const auto model = instances::random_model(2000 + trial);
    const auto& s = model.states();
    for (std::size_t x = 0; x < s.size(); ++x)
      for (std::size_t eta : s.targets())
        for (std::size_t xi : s.targets())
          EXPECT_LE(model.shift_cost(x, xi), model.shift_cost(x, eta) + model.shift_cost(eta, xi));
  }
}
