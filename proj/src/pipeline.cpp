#include "flexio/pipeline.hpp"

#include <algorithm>

#include "flexio/metrics.hpp"
#include "flexio/parallel.hpp"

namespace flexio {

const char* to_string(BoundsRule rule) {
  return rule == BoundsRule::kZero ? "zero" : "observed-demand";
}

BoundsRule parse_bounds_rule(const std::string& text) {
  if (text == "observed-demand") return BoundsRule::kObservedDemand;
  if (text == "zero") return BoundsRule::kZero;
  throw InvalidInput("bounds: expected observed-demand or zero, got '" + text + "'");
}

FitResult fit_dataset(const Dataset& train, const FitConfig& config, const TariffSpec& tariff,
                      BoundsRule bounds) {
  train.validate();
  const DaySignals sig = build_day_signals(train, tariff);
  std::vector<FlexBounds> k = default_bounds(train);
  if (bounds == BoundsRule::kZero) {
    for (auto& b : k) {
      b.sf_plus.setZero();
      b.sf_minus.setZero();
      b.sd.setZero();
    }
  }
  return fit(train.days, k, sig.prices, sig.costs, config);
}

std::vector<Forecast> forecast_dataset(const FitResult& fit, const Dataset& train,
                                       const Dataset& target, const TariffSpec& tariff,
                                       const Vector& levels, BoundsRule rule) {
  target.validate();
  const DaySignals sig = build_day_signals(target, tariff);
  FlexBounds bounds = forecast_bounds(train.days);
  if (rule == BoundsRule::kZero) {
    bounds.sf_plus.setZero();
    bounds.sf_minus.setZero();
    bounds.sd.setZero();
  }
  Matrix residuals;
  if (levels.size() > 0) residuals = training_residuals(fit, train.days);
  std::vector<Forecast> out;
  for (std::size_t s = 0; s < target.size(); ++s) {
    ForecastInputs in{sig.prices[s], sig.costs[s], target.days[s].gen, target.days[s].features, bounds};
    Forecast f = point_forecast(fit, in, fit.hyper.t_max);
    if (levels.size() > 0) attach_quantiles(f, residuals, levels);
    out.push_back(std::move(f));
  }
  return out;
}

Matrix demand_matrix(const Dataset& data) {
  Matrix m(static_cast<Eigen::Index>(data.size()), data.periods());
  for (std::size_t s = 0; s < data.size(); ++s) {
    m.row(static_cast<Eigen::Index>(s)) = data.days[s].demand.transpose();
  }
  return m;
}

Matrix net_matrix(const std::vector<Forecast>& forecasts) {
  if (forecasts.empty()) return Matrix();
  Matrix m(static_cast<Eigen::Index>(forecasts.size()), forecasts.front().periods());
  for (std::size_t s = 0; s < forecasts.size(); ++s) {
    m.row(static_cast<Eigen::Index>(s)) = forecasts[s].net.transpose();
  }
  return m;
}

std::vector<GridPoint> default_grid(int periods) {
  std::vector<int> t_values;
  for (int t : {4, 8, 12, 24}) {
    if (t <= periods) t_values.push_back(t);
  }
  if (t_values.empty()) t_values.push_back(periods);
  const double gammas[] = {0.1, 1.0, 10.0};
  std::vector<GridPoint> grid;
  for (int t : t_values) {
    for (double a : {0.0, 1.0, 2.0}) {
      for (double g0 : gammas) {
        for (double g1 : gammas) {
          for (double g2 : gammas) grid.push_back(GridPoint{t, a, {g0, g1, g2}});
        }
      }
    }
  }
  return grid;
}

GridSearchResult grid_search(const Dataset& data, std::vector<GridPoint> grid, const FitConfig& base,
                             const TariffSpec& tariff, int holdout, BoundsRule bounds) {
  data.validate();
  if (grid.empty()) throw InvalidInput("grid search: empty grid");
  if (holdout < 1 || static_cast<std::size_t>(holdout) >= data.size()) {
    throw InvalidInput("grid search: holdout must leave at least one training day");
  }
  for (const auto& p : grid) {
    Hyperparams h = base.hyper;
    h.t_max = p.t_max;
    h.alpha = p.alpha;
    h.gamma_sf_plus = p.gamma[0];
    h.gamma_sf_minus = p.gamma[1];
    h.gamma_sd = p.gamma[2];
    h.validate(static_cast<int>(data.periods()));
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const std::size_t n_train = data.size() - static_cast<std::size_t>(holdout);
  const Dataset train = data.slice(0, n_train);
  const Dataset held = data.slice(n_train, static_cast<std::size_t>(holdout));
  const Matrix truth = demand_matrix(held);

  // Points sharing (T^max, alpha) are consecutive after sorting; each such
  // group is one job.
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i == 0 || grid[i].t_max != grid[i - 1].t_max || grid[i].alpha != grid[i - 1].alpha) {
      groups.emplace_back(i, i);
    }
    groups.back().second = i + 1;
  }
  const int workers = thread_count(base.threads);
  std::vector<double> scores(grid.size());
  parallel_for(
      groups.size(),
      [&](std::size_t g) {
        const auto [first, last] = groups[g];
        FitConfig cfg = base;
        cfg.hyper.t_max = grid[first].t_max;
        cfg.hyper.alpha = grid[first].alpha;
        if (groups.size() > 1) cfg.threads = 1;
        FitResult f = fit_dataset(train, cfg, tariff, bounds);
        for (std::size_t i = first; i < last; ++i) {
          refit_envelope_rules(f, train.days, grid[i].gamma, base.scaling, base.ridge);
          const Matrix point = net_matrix(forecast_dataset(f, train, held, tariff, Vector(), bounds));
          scores[i] = mae(truth.reshaped(), point.reshaped());
        }
      },
      workers);

  GridSearchResult result;
  for (std::size_t i = 0; i < grid.size(); ++i) result.ranked.push_back(GridScore{grid[i], scores[i]});
  std::stable_sort(result.ranked.begin(), result.ranked.end(),
                   [](const GridScore& a, const GridScore& b) { return a.mae < b.mae; });

  const GridPoint& best = result.ranked.front().point;
  FitConfig cfg = base;
  cfg.hyper.t_max = best.t_max;
  cfg.hyper.alpha = best.alpha;
  cfg.hyper.gamma_sf_plus = best.gamma[0];
  cfg.hyper.gamma_sf_minus = best.gamma[1];
  cfg.hyper.gamma_sd = best.gamma[2];
  result.best_fit = fit_dataset(data, cfg, tariff, bounds);
  return result;
}

}  // namespace flexio
