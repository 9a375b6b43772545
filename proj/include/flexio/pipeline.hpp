#pragma once

#include <array>
#include <string>
#include <vector>

#include "flexio/dataset.hpp"
#include "flexio/fit.hpp"
#include "flexio/forecast.hpp"

namespace flexio {

enum class BoundsRule {
  // K = |observed demand| per day and hour; forecasts use the training maximum.
  kObservedDemand,
  // K = 0: no flexibility, the fit is baseload only.
  kZero,
};

const char* to_string(BoundsRule rule);
BoundsRule parse_bounds_rule(const std::string& text);

/// Builds prices, costs and bounds for every day, then fits.
FitResult fit_dataset(const Dataset& train, const FitConfig& config, const TariffSpec& tariff,
                      BoundsRule bounds = BoundsRule::kObservedDemand);

/// Point forecasts for every day of `target`; quantiles are attached when
/// `levels` is nonempty, using the in-sample residuals on `train`.
std::vector<Forecast> forecast_dataset(const FitResult& fit, const Dataset& train,
                                       const Dataset& target, const TariffSpec& tariff,
                                       const Vector& levels = Vector(),
                                       BoundsRule bounds = BoundsRule::kObservedDemand);

/// Stacks one row per day.
Matrix demand_matrix(const Dataset& data);
Matrix net_matrix(const std::vector<Forecast>& forecasts);

struct GridPoint {
  int t_max = 24;
  double alpha = 0.0;
  std::array<double, 3> gamma{1.0, 1.0, 1.0};

  auto operator<=>(const GridPoint&) const = default;
};

/// T^max in {4, 8, 12, 24} (kept when <= periods), alpha in {0, 1, 2} and every
/// bandwidth in {0.1, 1, 10}.
std::vector<GridPoint> default_grid(int periods);

struct GridScore {
  GridPoint point;
  double mae = 0.0;
};

struct GridSearchResult {
  // Ascending MAE; ties keep the lexicographic order of the points.
  std::vector<GridScore> ranked;
  // Best point refitted on every day.
  FitResult best_fit;
};

/// Fits on all but the last `holdout` days and scores point forecasts of the
/// held-out days. Bandwidths only change the kernel rules, so each
/// (T^max, alpha) pair is fitted once.
GridSearchResult grid_search(const Dataset& data, std::vector<GridPoint> grid, const FitConfig& base,
                             const TariffSpec& tariff, int holdout = 5,
                             BoundsRule bounds = BoundsRule::kObservedDemand);

}  // namespace flexio
