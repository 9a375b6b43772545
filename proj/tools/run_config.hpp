#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flexio/dataset.hpp"
#include "flexio/fit.hpp"
#include "flexio/pipeline.hpp"
#include "flexio/synthetic.hpp"
#include "flexio/types.hpp"

namespace flexio::cli {

/// Thrown with every problem found in a config, one per line.
class ConfigError : public InvalidInput {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct TariffConfig {
  double flat = 25.0;
  double peak = 35.0;
  double offpeak = 20.0;
  std::vector<std::pair<int, int>> peak_windows{{17, 21}};
  ShedPriceRule shed_rule = ShedPriceRule::kMeanShiftUpIncentive;
  std::optional<double> shed_cost;

  TariffSpec build(int periods) const;
};

struct GridConfig {
  std::vector<int> t_max{4, 8, 12, 24};
  std::vector<double> alpha{0.0, 1.0, 2.0};
  std::vector<double> gamma_sf_plus{0.1, 1.0, 10.0};
  std::vector<double> gamma_sf_minus{0.1, 1.0, 10.0};
  std::vector<double> gamma_sd{0.1, 1.0, 10.0};
  int holdout_days = 5;

  /// Cartesian product, with T^max values above `periods` dropped.
  std::vector<GridPoint> points(int periods) const;
};

struct RunConfig {
  std::string source;
  std::uint64_t seed = 1;

  // Input data; paths are relative to the config file.
  std::string data_path;
  CsvSchema schema;
  // Days used for fitting, counted from the first; 0 means every day before
  // the evaluation window.
  int train_days = 0;
  // Days forecast and scored after the training window.
  int eval_days = 5;

  TariffConfig tariff;
  SyntheticSpec simulate;
  FitConfig fit;
  BoundsRule bounds = BoundsRule::kObservedDemand;

  bool quantiles = false;
  Vector levels;
  std::string fit_path;       // empty: <out>/fit.txt
  std::string forecast_path;  // empty: <out>/forecast.csv

  bool baseline = false;
  int naive_lookback = 7;

  GridConfig grid;
};

/// Parses YAML text. Relative paths are resolved against `base_dir`.
RunConfig parse_run_config(const std::string& text, const std::string& base_dir,
                           const std::string& source = "<config>");
RunConfig load_run_config(const std::string& path);

/// Training and evaluation day ranges for a dataset of `days` days.
struct Window {
  std::size_t train_first = 0;
  std::size_t train_count = 0;
  std::size_t eval_first = 0;
  std::size_t eval_count = 0;
};
/// Throws when the data cannot hold the training window, or the evaluation
/// window as well when `need_eval` is set.
Window resolve_window(const RunConfig& config, std::size_t days, bool need_eval);

}  // namespace flexio::cli
