#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"

namespace {

using flexio::cli::RunConfig;
using Command = void (*)(const RunConfig&, const std::string&, std::ostream&);

struct Flags {
  std::string config;
  std::string out = "out";
  std::uint64_t seed = 0;
  std::string mode;
  bool quantiles = false;
  std::string baseline;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Estimate and forecast behind-the-meter flexible demand from net load."};
  app.require_subcommand(1);
  const std::map<std::string, std::pair<std::string, Command>> commands{
      {"simulate", {"Generate a synthetic dataset and its ground truth", flexio::cli::cmd_simulate}},
      {"fit", {"Fit baseload, envelopes and decision rules on the training window", flexio::cli::cmd_fit}},
      {"forecast", {"Forecast the evaluation window from a fitted model", flexio::cli::cmd_forecast}},
      {"evaluate", {"Score a forecast file against the evaluation window", flexio::cli::cmd_evaluate}},
      {"gridsearch", {"Rank hyperparameters by held-out MAE and refit the best", flexio::cli::cmd_gridsearch}},
  };

  Flags flags;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", flags.config, "YAML run config")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", flags.seed, "Seed, overrides the config");
    sub->add_option("--mode", flags.mode, "Solver mode, overrides the config")
        ->check(CLI::IsMember({"exact", "alternating"}));
    sub->add_flag("--quantiles", flags.quantiles, "Emit quantile forecasts");
    sub->add_option("--baseline", flags.baseline, "Also score a baseline")->check(CLI::IsMember({"seasonal-naive"}));
  }
  CLI11_PARSE(app, argc, argv);

  const CLI::App* chosen = app.get_subcommands().front();
  try {
    RunConfig config = flexio::cli::load_run_config(flags.config);
    flexio::cli::Overrides over;
    if (chosen->count("--seed") > 0) over.seed = flags.seed;
    if (!flags.mode.empty()) over.mode = flexio::parse_solver_mode(flags.mode);
    over.quantiles = flags.quantiles;
    if (!flags.baseline.empty()) over.baseline = flags.baseline;
    flexio::cli::apply_overrides(config, over);
    commands.at(chosen->get_name()).second(config, flags.out, std::cout);
  } catch (const flexio::cli::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
