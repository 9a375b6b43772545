#include <gtest/gtest.h>

#include <random>

#include "flexio/qp.hpp"

namespace flexio {
namespace {

TEST(Qp, UnconstrainedLeastSquares) {
  QpBuilder qp;
  const int x = qp.add_variable();
  const int y = qp.add_variable();
  qp.add_squared({{x, 1.0}}, -3.0, 1.0);
  qp.add_squared({{x, 1.0}, {y, 1.0}}, -5.0, 2.0);
  const auto r = qp.solve();
  ASSERT_EQ(r.status, QpStatus::kOptimal);
  EXPECT_NEAR(r.x(x), 3.0, 1e-8);
  EXPECT_NEAR(r.x(y), 2.0, 1e-8);
  EXPECT_NEAR(r.objective, 0.0, 1e-10);
}

TEST(Qp, BoundActive) {
  QpBuilder qp;
  const int x = qp.add_variable(0.0, 1.0);
  qp.add_squared({{x, 1.0}}, -3.0, 1.0);
  const auto r = qp.solve();
  ASSERT_EQ(r.status, QpStatus::kOptimal);
  EXPECT_NEAR(r.x(x), 1.0, 1e-8);
  EXPECT_NEAR(r.objective, 4.0, 1e-8);
}

TEST(Qp, EqualityAndInequality) {
  // min (x-2)^2 + (y-2)^2  s.t. x + y = 1, x <= 0.25
  QpBuilder qp;
  const int x = qp.add_variable();
  const int y = qp.add_variable();
  qp.add_squared({{x, 1.0}}, -2.0, 1.0);
  qp.add_squared({{y, 1.0}}, -2.0, 1.0);
  qp.add_equality({{x, 1.0}, {y, 1.0}}, 1.0);
  qp.add_inequality({{x, 1.0}}, 0.25);
  const auto r = qp.solve();
  ASSERT_EQ(r.status, QpStatus::kOptimal);
  EXPECT_NEAR(r.x(x), 0.25, 1e-8);
  EXPECT_NEAR(r.x(y), 0.75, 1e-8);
}

TEST(Qp, FixedVariableAndLinearTerm) {
  QpBuilder qp;
  const int x = qp.add_variable(2.0, 2.0);
  const int y = qp.add_variable(0.0, QpBuilder::kInf);
  qp.add_squared({{x, 1.0}, {y, -1.0}}, 0.0, 1.0);
  qp.add_linear(y, 1.0);
  const auto r = qp.solve();
  ASSERT_EQ(r.status, QpStatus::kOptimal);
  EXPECT_NEAR(r.x(x), 2.0, 1e-9);
  // d/dy (2 - y)^2 + y = -2(2 - y) + 1 = 0
  EXPECT_NEAR(r.x(y), 1.5, 1e-8);
}

TEST(Qp, LinearProgramWithFreeDirection) {
  // Objective only depends on x; y is pinned by constraints.
  QpBuilder qp;
  const int x = qp.add_variable(-1.0, 1.0);
  const int y = qp.add_variable();
  qp.add_linear(x, 1.0);
  qp.add_inequality({{y, 1.0}, {x, -1.0}}, 0.0);
  qp.add_inequality({{y, -1.0}, {x, 1.0}}, 0.0);
  const auto r = qp.solve();
  ASSERT_EQ(r.status, QpStatus::kOptimal);
  EXPECT_NEAR(r.x(x), -1.0, 1e-8);
  EXPECT_NEAR(r.x(y), -1.0, 1e-8);
}

// Projection of a point onto the box [0,1]^n intersected with sum = s; checked
// against the exact water-filling solution.
TEST(Qp, ProjectionMatchesWaterFilling) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 8;
    Vector v(n);
    for (auto& e : v) e = u(rng);
    const double total = 3.0;
    QpBuilder qp;
    std::vector<QpBuilder::Term> sum;
    for (int i = 0; i < n; ++i) {
      const int id = qp.add_variable(0.0, 1.0);
      qp.add_squared({{id, 1.0}}, -v(i), 1.0);
      sum.emplace_back(id, 1.0);
    }
    qp.add_equality(sum, total);
    const auto r = qp.solve();
    ASSERT_EQ(r.status, QpStatus::kOptimal);
    double lo = -10, hi = 10;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double s = (v.array() - mid).max(0.0).min(1.0).sum();
      (s > total ? lo : hi) = mid;
    }
    const Vector expected = (v.array() - 0.5 * (lo + hi)).max(0.0).min(1.0);
    EXPECT_LE((r.x - expected).lpNorm<Eigen::Infinity>(), 1e-9) << r.residual << " it " << r.iterations;
  }
}

}  // namespace
}  // namespace flexio
