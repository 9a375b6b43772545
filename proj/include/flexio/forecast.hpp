#pragma once

#include <iosfwd>
#include <vector>

#include "flexio/fit.hpp"
#include "flexio/types.hpp"

namespace flexio {

struct Forecast {
  Vector net;
  Vector baseload_net;  // d_bl - gen
  Vector flexible;      // shift_up - shift_down + shed_kept
  Vector shift_up;
  Vector shift_down;
  Vector shed_kept;
  Vector levels;     // quantile levels, empty when no quantiles were attached
  Matrix quantiles;  // levels x periods

  Eigen::Index periods() const { return net.size(); }
};

/// Exogenous inputs of one forecast day.
struct ForecastInputs {
  PriceSignal prices;
  ComfortCosts costs;
  Vector gen;
  Matrix features;
  FlexBounds bounds;
};

/// Solves the consumer program for the forecast day with the fitted baseload
/// and the kernel envelopes evaluated at that day's features.
Forecast point_forecast(const FitResult& fit, const ForecastInputs& day, int t_max);

/// Per-hour largest |demand| over the training days, used as the forecast-day bound.
FlexBounds forecast_bounds(const std::vector<DaySample>& train);

/// Observed minus reconstructed net demand for every training day (days x periods).
Matrix training_residuals(const FitResult& fit, const std::vector<DaySample>& train);

/// Point forecast plus per-hour empirical residual quantiles (linear
/// interpolation between order statistics), made nondecreasing in the level.
Matrix quantile_forecast(const Vector& point, const Matrix& residuals, const Vector& levels);

void attach_quantiles(Forecast& forecast, const Matrix& residuals, const Vector& levels);

/// The 21 levels 0.01, 0.05, 0.10, ..., 0.95, 0.99.
Vector default_quantile_levels();

/// Header "q_05" style name for a level.
std::string quantile_column(double level);

/// One row per (day, hour). Quantile columns follow the first forecast's levels.
void write_forecast_csv(std::ostream& out, const std::vector<Forecast>& days,
                        const std::vector<int>& day_labels);

}  // namespace flexio
