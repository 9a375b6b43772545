#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "flexio/pipeline.hpp"
#include "flexio/synthetic.hpp"

namespace flexio {
namespace {

// Flat prices, no generation and a constant consumer: every grid point
// forecasts the same day.
SyntheticSpec flat_spec(int periods, int days) {
  SyntheticSpec spec;
  spec.periods = periods;
  spec.days = days;
  spec.t_max = periods;
  spec.peak_windows = {{periods / 2, periods / 2 + 1}};
  spec.peak_price = spec.offpeak_price = spec.flat_price;
  spec.tou_jitter = 0.0;
  spec.gen_peak = 0.0;
  spec.shed_cost = 200.0;
  return spec;
}

FitConfig alternating() {
  FitConfig cfg;
  cfg.solver_mode = SolverMode::kAlternating;
  return cfg;
}

TEST(DefaultGrid, CoversEveryCombination) {
  const auto grid = default_grid(24);
  EXPECT_EQ(grid.size(), 4u * 3u * 27u);
  std::set<int> t_max;
  std::set<double> alpha, gamma;
  for (const auto& p : grid) {
    t_max.insert(p.t_max);
    alpha.insert(p.alpha);
    gamma.insert(p.gamma.begin(), p.gamma.end());
  }
  EXPECT_EQ(t_max, (std::set<int>{4, 8, 12, 24}));
  EXPECT_EQ(alpha, (std::set<double>{0.0, 1.0, 2.0}));
  EXPECT_EQ(gamma, (std::set<double>{0.1, 1.0, 10.0}));
  EXPECT_TRUE(std::is_sorted(grid.begin(), grid.end()));
}

TEST(DefaultGrid, KeepsOnlyBudgetsThatFitTheDay) {
  std::set<int> t_max;
  for (const auto& p : default_grid(6)) t_max.insert(p.t_max);
  EXPECT_EQ(t_max, (std::set<int>{4}));
  t_max.clear();
  for (const auto& p : default_grid(3)) t_max.insert(p.t_max);
  EXPECT_EQ(t_max, (std::set<int>{3}));
}

TEST(GridSearch, SinglePointIsSelectedAndRefittedOnEveryDay) {
  const SyntheticSpec spec = flat_spec(6, 9);
  const auto data = generate_synthetic(spec);
  const GridPoint point{4, 1.0, {0.1, 1.0, 10.0}};
  const auto r = grid_search(data.dataset, {point}, alternating(), spec.tariff(), 3);
  ASSERT_EQ(r.ranked.size(), 1u);
  EXPECT_EQ(r.ranked.front().point, point);
  EXPECT_EQ(r.best_fit.per_day.size(), 9u);
  EXPECT_EQ(r.best_fit.hyper.t_max, 4);
  EXPECT_EQ(r.best_fit.hyper.alpha, 1.0);
  EXPECT_EQ(r.best_fit.hyper.gamma_sf_plus, 0.1);
  EXPECT_EQ(r.best_fit.hyper.gamma_sf_minus, 1.0);
  EXPECT_EQ(r.best_fit.hyper.gamma_sd, 10.0);
  EXPECT_EQ(r.best_fit.envelope_model.days, 9);
}

TEST(GridSearch, TiesKeepLexicographicOrder) {
  const SyntheticSpec spec = flat_spec(6, 8);
  const auto data = generate_synthetic(spec);
  std::vector<GridPoint> grid;
  for (double g : {10.0, 1.0, 0.1}) grid.push_back({6, 0.0, {g, 1.0, 1.0}});
  grid.push_back(grid.front());
  const auto r = grid_search(data.dataset, grid, alternating(), spec.tariff(), 3);
  ASSERT_EQ(r.ranked.size(), 3u);
  for (const auto& s : r.ranked) EXPECT_EQ(s.mae, r.ranked.front().mae);
  EXPECT_EQ(r.ranked[0].point.gamma[0], 0.1);
  EXPECT_EQ(r.ranked[1].point.gamma[0], 1.0);
  EXPECT_EQ(r.ranked[2].point.gamma[0], 10.0);
}

TEST(GridSearch, RejectsEmptyGridsAndHoldoutsWithoutTraining) {
  const SyntheticSpec spec = flat_spec(6, 4);
  const auto data = generate_synthetic(spec);
  EXPECT_THROW(grid_search(data.dataset, {}, alternating(), spec.tariff(), 2), InvalidInput);
  EXPECT_THROW(grid_search(data.dataset, {GridPoint{6}}, alternating(), spec.tariff(), 4), InvalidInput);
  EXPECT_THROW(grid_search(data.dataset, {GridPoint{7}}, alternating(), spec.tariff(), 2), InvalidInput);
}

// Noiseless data from a kernel shed rule with bandwidth `gamma`. The rule
// interpolates targets on the training days: zero on the first day, so the
// baseload is identified, and above the shed amount elsewhere, so every
// envelope is visible in the demand.
SyntheticData kernel_shed_data(double gamma, std::uint64_t seed, int train, int holdout) {
  SyntheticSpec spec = flat_spec(24, train + holdout);
  spec.seed = seed;
  const auto base = generate_synthetic(spec);
  std::vector<Matrix> features;
  for (int s = 0; s < train; ++s) features.push_back(base.dataset.days[s].features);
  KernelEnvelopeModel rule = KernelEnvelopeModel::create(features, {1.0, 1.0, gamma});
  std::array<Matrix, 3> targets;
  for (auto& m : targets) m = Matrix::Zero(train, 24);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> level(0.2, 0.6);
  for (int s = 1; s < train; ++s) {
    for (int t = 0; t < 24; ++t) targets[2](s, t) = level(rng);
  }
  fit_coefficients(rule, targets);
  spec.rule = EnvelopeRuleKind::kKernel;
  spec.kernel_rule = std::move(rule);
  return generate_synthetic(spec);
}

TEST(GridSearch, TrueBandwidthRanksFirstOnNoiselessData) {
  const SyntheticSpec tariff_spec = flat_spec(24, 1);
  for (double truth : {0.1, 1.0, 10.0}) {
    for (std::uint64_t seed : {1u, 2u}) {
      const auto data = kernel_shed_data(truth, seed, 20, 5);
      std::vector<GridPoint> grid;
      for (double g : {0.1, 1.0, 10.0}) grid.push_back({24, 0.0, {1.0, 1.0, g}});
      const auto r = grid_search(data.dataset, grid, alternating(), tariff_spec.tariff(), 5);
      EXPECT_EQ(r.ranked[0].point.gamma[2], truth) << "seed " << seed;
      EXPECT_LT(r.ranked[0].mae, r.ranked[1].mae);
      EXPECT_LT((r.best_fit.d_bl - data.truth[0].d_bl).cwiseAbs().maxCoeff(), 1e-3);
    }
  }
}

}  // namespace
}  // namespace flexio
