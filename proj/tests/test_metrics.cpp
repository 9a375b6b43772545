#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "flexio/metrics.hpp"
#include "support.hpp"

namespace flexio {
namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

TEST(Metrics, HandComputedMaeAndRmse) {
  EXPECT_DOUBLE_EQ(mae(vec({1, 2}), vec({2, 4})), 1.5);
  EXPECT_DOUBLE_EQ(rmse(vec({1, 2}), vec({2, 4})), std::sqrt(2.5));
  EXPECT_THROW(mae(vec({1}), vec({1, 2})), InvalidInput);
  EXPECT_THROW(rmse(Vector(), Vector()), InvalidInput);
}

TEST(Metrics, MaeNeverExceedsRmse) {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 100; ++rep) {
    const Vector a = testing::uniform_vector(rng, 1 + rep % 17, -5.0, 5.0);
    const Vector b = testing::uniform_vector(rng, a.size(), -5.0, 5.0);
    EXPECT_LE(mae(a, b), rmse(a, b) + 1e-12);
  }
}

TEST(Metrics, PinballExamples) {
  EXPECT_DOUBLE_EQ(pinball(0.5, 0.0, 2.0), 1.0);
  EXPECT_NEAR(pinball(0.9, 3.0, 1.0), 0.2, 1e-15);
  EXPECT_DOUBLE_EQ(pinball(0.9, 1.0, 3.0), 1.8);
  EXPECT_THROW(pinball(1.0, 0.0, 0.0), InvalidInput);
}

TEST(Metrics, CrpsOfDegenerateQuantilesAtTheTruthIsZero) {
  const Vector levels = vec({0.1, 0.25, 0.5, 0.75, 0.9});
  EXPECT_EQ(crps_from_quantiles(levels, Vector::Constant(5, 3.0), 3.0), 0.0);
}

TEST(Metrics, CrpsOfAUniformUnitErrorIsOne) {
  const Vector levels = vec({0.1, 0.25, 0.5, 0.75, 0.9});
  EXPECT_NEAR(crps_from_quantiles(levels, Vector::Constant(5, 4.0), 3.0), 1.0, 1e-9);
  EXPECT_NEAR(crps_from_quantiles(levels, Vector::Constant(5, 2.0), 3.0), 1.0, 1e-9);
}

TEST(Metrics, CrpsDirectAndViaPinballAgree) {
  std::mt19937_64 rng(2);
  const Vector levels = vec({0.01, 0.05, 0.2, 0.5, 0.8, 0.95, 0.99});
  for (int rep = 0; rep < 200; ++rep) {
    Vector v = testing::uniform_vector(rng, levels.size(), -3.0, 3.0);
    std::sort(v.begin(), v.end());
    const double y = std::uniform_real_distribution<double>(-4.0, 4.0)(rng);
    EXPECT_NEAR(crps_from_quantiles(levels, v, y), crps_via_pinball(levels, v, y), 1e-12);
  }
}

TEST(Metrics, HalvingErrorsHalvesCrps) {
  std::mt19937_64 rng(3);
  const Vector levels = vec({0.1, 0.3, 0.5, 0.7, 0.9});
  for (int rep = 0; rep < 50; ++rep) {
    Vector err = testing::uniform_vector(rng, levels.size(), -2.0, 2.0);
    std::sort(err.begin(), err.end());
    const double y = 1.25;
    const double full = crps_from_quantiles(levels, (err.array() + y).matrix(), y);
    const double half = crps_from_quantiles(levels, (0.5 * err.array() + y).matrix(), y);
    EXPECT_NEAR(half, 0.5 * full, 1e-12);
  }
}

TEST(Metrics, NonmonotoneQuantilesAreRejected) {
  EXPECT_THROW(crps_from_quantiles(vec({0.25, 0.5, 0.75}), vec({1.0, 0.5, 2.0}), 1.0), InvalidInput);
  EXPECT_THROW(crps_from_quantiles(vec({0.25, 0.5}), vec({1.0}), 1.0), InvalidInput);
}

TEST(SeasonalNaive, LookbackOneCopiesTheLastDay) {
  Matrix h(3, 2);
  h << 1, 2, 3, 4, 5, 6;
  EXPECT_EQ(seasonal_naive(h, 1), vec({5, 6}));
}

TEST(SeasonalNaive, ConstantHistoryGivesTheConstant) {
  EXPECT_EQ(seasonal_naive(Matrix::Constant(9, 4, 2.5), 7), Vector::Constant(4, 2.5));
}

TEST(SeasonalNaive, AlternatingHistoryAveragesOut) {
  Matrix h(6, 3);
  for (int s = 0; s < 6; ++s) h.row(s).setConstant(s % 2 == 0 ? 0.0 : 2.0);
  EXPECT_EQ(seasonal_naive(h, 2), Vector::Constant(3, 1.0));
  EXPECT_THROW(seasonal_naive(h, 7), InvalidInput);
  EXPECT_THROW(seasonal_naive(h, 0), InvalidInput);
}

TEST(Evaluate, IdenticalForecastsScoreZero) {
  std::mt19937_64 rng(4);
  Matrix truth(3, 4);
  for (auto& x : truth.reshaped()) x = std::uniform_real_distribution<double>(0, 5)(rng);
  const EvalReport r = evaluate("io", truth, truth);
  EXPECT_EQ(r.mae, 0.0);
  EXPECT_EQ(r.rmse, 0.0);
  EXPECT_FALSE(r.has_quantiles);
}

TEST(Evaluate, AggregatesPerHourAndPerLevel) {
  Matrix truth(2, 2);
  truth << 1, 2, 3, 4;
  Matrix point(2, 2);
  point << 2, 2, 3, 6;
  const Vector levels = vec({0.25, 0.75});
  std::vector<Matrix> q(2, Matrix(2, 2));
  q[0] << 1, 1, 2, 3;
  q[1] << 3, 4, 3, 5;
  const EvalReport r = evaluate("io", truth, point, levels, q);
  EXPECT_DOUBLE_EQ(r.mae, 0.75);
  EXPECT_DOUBLE_EQ(r.rmse, std::sqrt(5.0 / 4.0));
  EXPECT_DOUBLE_EQ(r.mae_per_hour(0), 0.5);
  EXPECT_DOUBLE_EQ(r.mae_per_hour(1), 1.0);
  double pooled = 0.0;
  Vector per_hour = Vector::Zero(2);
  for (int s = 0; s < 2; ++s) {
    for (int t = 0; t < 2; ++t) {
      const double c = crps_via_pinball(levels, q[s].col(t), truth(s, t));
      pooled += c / 4.0;
      per_hour(t) += c / 2.0;
    }
  }
  EXPECT_NEAR(r.crps_mean, pooled, 1e-12);
  EXPECT_NEAR(r.crps_per_hour(1), per_hour(1), 1e-12);
  EXPECT_NEAR(r.crps_hour_mean, per_hour.mean(), 1e-12);
  EXPECT_NEAR(r.pinball_per_level(0),
              (pinball(0.25, 1, 1) + pinball(0.25, 1, 2) + pinball(0.25, 3, 3) + pinball(0.25, 4, 4)) / 4,
              1e-12);
  std::ostringstream csv;
  write_report_csv(csv, {r});
  EXPECT_EQ(csv.str().rfind("method,metric,hour,value\n", 0), 0u);
  EXPECT_NE(csv.str().find("io,mae,all,0.75"), std::string::npos);
}

}  // namespace
}  // namespace flexio
