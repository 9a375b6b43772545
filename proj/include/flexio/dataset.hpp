#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flexio/model.hpp"
#include "flexio/types.hpp"

namespace flexio {

struct Dataset {
  std::vector<DaySample> days;
  std::vector<std::string> feature_names;
  std::vector<bool> weekday;        // per day; Monday to Friday
  std::vector<std::string> season;  // per day: winter, spring, summer, autumn
  // Per-day time-of-use price, either empty or one vector per day.
  std::vector<Vector> tou;

  std::size_t size() const { return days.size(); }
  Eigen::Index periods() const { return days.empty() ? 0 : days.front().periods(); }
  Eigen::Index features() const { return days.empty() ? 0 : days.front().features.cols(); }
  void validate() const;

  /// Days [first, first + count) as a new dataset.
  Dataset slice(std::size_t first, std::size_t count) const;
};

enum class Aggregation { kMean, kSum };

/// Column-name based CSV layout.
struct CsvSchema {
  std::string date_column = "date";
  std::string hour_column = "hour";
  std::string demand_column = "net_demand_kwh";
  std::string generation_column = "generation_kwh";
  // Optional per-row time-of-use price.
  std::string tou_column;
  // Empty means every column not named above.
  std::vector<std::string> feature_columns;
  int periods = 24;
  bool weekdays_only = false;
  // How rows sharing a (date, hour) are combined.
  Aggregation aggregation = Aggregation::kMean;
  // When both are set, adds a "tdiff" feature (T - Ta) / (log T - log Ta)
  // scaled onto [-0.5, 0.5] over the file.
  std::string tdiff_temperature;
  std::string tdiff_apparent;
};

Dataset load_csv(const std::string& path, const CsvSchema& schema = {});
Dataset parse_csv(const std::string& text, const CsvSchema& schema = {},
                  const std::string& source = "<memory>");
/// Writes the layout load_csv reads with the default schema (plus tou_price when present).
void save_csv(const std::string& path, const Dataset& data);
std::string to_csv(const Dataset& data);

/// K = |demand| per day and hour for all three families.
std::vector<FlexBounds> default_bounds(const Dataset& data);

/// True for Monday to Friday. Dates are YYYY-MM-DD.
bool is_weekday(const std::string& date);
std::string season_of(const std::string& date);

struct TariffSpec {
  double flat = 25.0;
  // Default schedule for days without their own time-of-use vector.
  Vector tou;
  ShedPriceRule shed_rule = ShedPriceRule::kMeanShiftUpIncentive;
  std::optional<double> shed_cost;
};

struct DaySignals {
  std::vector<PriceSignal> prices;
  std::vector<ComfortCosts> costs;
};

DaySignals build_day_signals(const Dataset& data, const TariffSpec& tariff);
DaySignals build_day_signals(const std::vector<Vector>& tou, const TariffSpec& tariff);

}  // namespace flexio
