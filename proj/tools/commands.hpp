#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include "run_config.hpp"

namespace flexio::cli {

/// Command-line flags that take precedence over the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<SolverMode> mode;
  bool quantiles = false;
  std::optional<std::string> baseline;
};

void apply_overrides(RunConfig& config, const Overrides& flags);

// Each command writes its files under `out_dir` (created if missing) and a
// short report to `log`.

/// data.csv (loadable with the default schema) and truth.csv.
void cmd_simulate(const RunConfig& config, const std::string& out_dir, std::ostream& log);
/// fit.txt (the fitted model) and components.csv for the training days.
void cmd_fit(const RunConfig& config, const std::string& out_dir, std::ostream& log);
/// forecast.csv for the evaluation window.
void cmd_forecast(const RunConfig& config, const std::string& out_dir, std::ostream& log);
/// evaluation.csv (overall, per-hour and per-level rows); the table goes to `log`.
void cmd_evaluate(const RunConfig& config, const std::string& out_dir, std::ostream& log);
/// grid.csv ranked by held-out MAE and fit.txt for the best point refitted on
/// the whole training window.
void cmd_gridsearch(const RunConfig& config, const std::string& out_dir, std::ostream& log);

}  // namespace flexio::cli
