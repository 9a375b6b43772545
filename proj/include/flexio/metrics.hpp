#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "flexio/types.hpp"

namespace flexio {

double mae(const Vector& truth, const Vector& forecast);
double rmse(const Vector& truth, const Vector& forecast);

/// Quantile score of `value` at `level` for observation y.
double pinball(double level, double value, double y);

/// 2 * mean over levels of pinball(level, value, y), summed directly.
double crps_from_quantiles(const Vector& levels, const Vector& values, double y);

/// Same quantity built from pinball().
double crps_via_pinball(const Vector& levels, const Vector& values, double y);

/// Per-hour mean of the last `lookback` rows of history (days x periods).
Vector seasonal_naive(const Matrix& history, int lookback);

struct EvalReport {
  std::string method;
  double mae = 0.0;
  double rmse = 0.0;
  // Mean over every (day, hour) cell.
  double crps_mean = 0.0;
  // Mean over hours of the per-hour-of-day averages.
  double crps_hour_mean = 0.0;
  bool has_quantiles = false;
  Vector mae_per_hour;
  Vector rmse_per_hour;
  Vector crps_per_hour;
  Vector levels;
  Vector pinball_per_level;
};

/// Scores point forecasts (days x periods) and, when `quantiles` is nonempty,
/// one levels x periods quantile matrix per day.
EvalReport evaluate(const std::string& method, const Matrix& truth, const Matrix& point,
                    const Vector& levels = Vector(), const std::vector<Matrix>& quantiles = {});

void write_report_csv(std::ostream& out, const std::vector<EvalReport>& reports);
void write_report_table(std::ostream& out, const std::vector<EvalReport>& reports);

}  // namespace flexio
