#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "flexio/serialize.hpp"
#include "run_config.hpp"

namespace flexio::cli {
namespace {

namespace fs = std::filesystem;

class Workdir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("flexio_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  RunConfig config(const std::string& yaml) {
    std::ofstream(dir_ / "run.yaml") << yaml;
    return load_run_config((dir_ / "run.yaml").string());
  }
  std::string out(const std::string& name = "out") const { return (dir_ / name).string(); }
  std::string read(const std::string& rel) const {
    std::ifstream in(dir_ / rel, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  fs::path dir_;
};

// Column `name` of a CSV file as numbers.
std::vector<double> column(const std::string& text, const std::string& name) {
  std::stringstream in(text);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  std::stringstream hs(line);
  for (std::string f; std::getline(hs, f, ',');) header.push_back(f);
  const auto idx = std::find(header.begin(), header.end(), name) - header.begin();
  std::vector<double> out;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::string f;
    for (long i = 0; i <= idx; ++i) std::getline(ls, f, ',');
    out.push_back(std::stod(f));
  }
  return out;
}

const char* kNoiseless = R"(
seed: 4
periods: 6
data:
  path: out/data.csv
window:
  eval_days: 1
tariff:
  peak_windows: [[3, 5]]
simulate:
  days: 4
  envelope: [0.3, 0.3, 0.1]
  gen_peak: 0
fit:
  mode: exact
)";

TEST_F(Workdir, EveryConfigProblemIsListed) {
  try {
    config(R"(
periods: 24
colour: blue
fit:
  mode: fast
  t_max: 30
  alpha: -1
  gamma: [1, 2]
tariff:
  flat: zero
  peak_windows: [[20, 30]]
grid:
  t_max: []
forecast:
  levels: [0.5, 0.2]
)");
    FAIL() << "expected a config error";
  } catch (const ConfigError& e) {
    const auto& p = e.problems();
    for (const char* expected :
         {"colour: unknown key", "fit.mode: expected one of exact, alternating", "fit.alpha: must be >= 0",
          "fit.gamma: expected three values (shift up, shift down, shed)", "tariff.flat: expected a number",
          "grid.t_max: must not be empty", "forecast.levels: must be strictly increasing",
          "fit.t_max: must be <= periods (24)"}) {
      EXPECT_NE(std::find(p.begin(), p.end(), expected), p.end()) << expected;
    }
    EXPECT_EQ(p.size(), 9u);
  }
}

TEST_F(Workdir, EmptyConfigGivesTheDefaults) {
  const RunConfig c = config("{}");
  EXPECT_EQ(c.fit.solver_mode, SolverMode::kExact);
  EXPECT_EQ(c.fit.hyper.t_max, 24);
  EXPECT_EQ(c.eval_days, 5);
  EXPECT_EQ(c.grid.holdout_days, 5);
  EXPECT_EQ(c.grid.points(24), default_grid(24));
  EXPECT_EQ(c.bounds, BoundsRule::kObservedDemand);
  EXPECT_FALSE(c.baseline);
}

TEST_F(Workdir, PathsAreRelativeToTheConfig) {
  const RunConfig c = config("data: {path: sub/x.csv}\nforecast: {fit: /abs/fit.txt}");
  EXPECT_EQ(c.data_path, (dir_ / "sub/x.csv").string());
  EXPECT_EQ(c.fit_path, "/abs/fit.txt");
}

TEST_F(Workdir, FlagsOverrideTheConfig) {
  RunConfig c = config("seed: 1\nfit: {mode: exact}");
  apply_overrides(c, Overrides{9, SolverMode::kAlternating, true, "seasonal-naive"});
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.simulate.seed, 9u);
  EXPECT_EQ(c.fit.solver_mode, SolverMode::kAlternating);
  EXPECT_TRUE(c.quantiles);
  EXPECT_TRUE(c.baseline);
  EXPECT_THROW(apply_overrides(c, Overrides{{}, {}, false, "persistence"}), InvalidInput);
}

TEST_F(Workdir, NoiselessSimulateFitForecastReproducesTheTruth) {
  const RunConfig c = config(kNoiseless);
  std::stringstream log;
  cmd_simulate(c, out(), log);
  cmd_fit(c, out(), log);
  cmd_forecast(c, out(), log);

  const FitResult f = load_fit(out() + "/fit.txt");
  EXPECT_LE(f.training_loss, 1e-6);
  EXPECT_LE(f.kkt_max_residual, 1e-8);
  const std::string comp = read("out/components.csv");
  const auto demand = column(comp, "demand");
  const auto fitted = column(comp, "fitted");
  ASSERT_EQ(demand.size(), 18u);
  for (std::size_t i = 0; i < demand.size(); ++i) EXPECT_NEAR(fitted[i], demand[i], 1e-3);

  const std::string fc = read("out/forecast.csv");
  const auto net = column(fc, "net");
  const auto base = column(fc, "baseload_net");
  const auto flex = column(fc, "flexible");
  const auto up = column(fc, "shift_up");
  const auto down = column(fc, "shift_down");
  ASSERT_EQ(net.size(), 6u);
  double up_sum = 0.0, down_sum = 0.0;
  for (std::size_t i = 0; i < net.size(); ++i) {
    EXPECT_EQ(net[i], base[i] + flex[i]);
    up_sum += up[i];
    down_sum += down[i];
  }
  EXPECT_NEAR(up_sum, down_sum, 1e-9);

  // The held-out day is the last row block of truth.csv.
  const auto truth = column(read("out/truth.csv"), "net_demand");
  ASSERT_EQ(truth.size(), 24u);
  for (std::size_t i = 0; i < net.size(); ++i) EXPECT_NEAR(net[i], truth[18 + i], 1e-6);
}

TEST_F(Workdir, IdenticalTruthAndForecastScoreZero) {
  RunConfig c = config(std::string(kNoiseless) + "evaluate: {forecast: out/data.csv}\n");
  std::stringstream log;
  cmd_simulate(c, out(), log);
  cmd_evaluate(c, out(), log);
  const std::string report = read("out/evaluation.csv");
  EXPECT_NE(report.find("io,mae,all,0\n"), std::string::npos) << report;
  EXPECT_NE(report.find("io,rmse,all,0\n"), std::string::npos) << report;
}

TEST_F(Workdir, ZeroBoundsFitBaseloadOnly) {
  RunConfig c = config(std::string(kNoiseless) + "  bounds: zero\n");
  std::stringstream log;
  cmd_simulate(c, out(), log);
  cmd_fit(c, out(), log);
  cmd_forecast(c, out(), log);
  const FitResult f = load_fit(out() + "/fit.txt");
  for (const auto& a : f.attributes) {
    EXPECT_EQ(a.env_sf_plus.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(a.env_sf_minus.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(a.env_sd.cwiseAbs().maxCoeff(), 0.0);
  }
  for (double v : column(read("out/components.csv"), "flexible")) EXPECT_EQ(v, 0.0);
  for (double v : column(read("out/forecast.csv"), "flexible")) EXPECT_EQ(v, 0.0);
}

TEST_F(Workdir, RepeatedRunsWriteIdenticalFiles) {
  const RunConfig c = config(std::string(kNoiseless) + "evaluate: {baseline: seasonal-naive, lookback: 2}\n");
  RunConfig q = c;
  q.quantiles = true;
  q.simulate.days = 7;
  q.fit.solver_mode = SolverMode::kAlternating;
  for (const char* name : {"a", "b"}) {
    std::stringstream log;
    cmd_simulate(q, out(name), log);
    RunConfig r = q;
    r.data_path = out(name) + "/data.csv";
    cmd_fit(r, out(name), log);
    cmd_forecast(r, out(name), log);
    cmd_evaluate(r, out(name), log);
  }
  for (const char* file : {"data.csv", "truth.csv", "fit.txt", "components.csv", "forecast.csv", "evaluation.csv"}) {
    EXPECT_EQ(read(std::string("a/") + file), read(std::string("b/") + file)) << file;
    EXPECT_FALSE(read(std::string("a/") + file).empty()) << file;
  }
}

TEST_F(Workdir, WindowMustFitTheData) {
  RunConfig c = config(std::string(kNoiseless));
  std::stringstream log;
  cmd_simulate(c, out(), log);
  c.train_days = 4;
  EXPECT_NO_THROW(resolve_window(c, 4, false));
  EXPECT_THROW(cmd_forecast(c, out(), log), InvalidInput);
  c.train_days = 5;
  EXPECT_THROW(cmd_fit(c, out(), log), InvalidInput);
}

TEST_F(Workdir, GridSearchWritesRankedTableAndBestFit) {
  RunConfig c = config(std::string(kNoiseless) +
                       "grid: {t_max: [6], alpha: [0, 1], gamma_sf_plus: [1], gamma_sf_minus: [1], "
                       "gamma_sd: [1], holdout_days: 1}\n");
  c.simulate.days = 5;
  c.fit.solver_mode = SolverMode::kAlternating;
  std::stringstream log;
  cmd_simulate(c, out(), log);
  cmd_gridsearch(c, out(), log);
  const std::string table = read("out/grid.csv");
  EXPECT_EQ(table.rfind("rank,t_max,alpha,gamma_sf_plus,gamma_sf_minus,gamma_sd,mae\n", 0), 0u);
  const auto mae = column(table, "mae");
  ASSERT_EQ(mae.size(), 2u);
  EXPECT_LE(mae[0], mae[1]);
  // Four training days; the best point is refitted on all of them.
  EXPECT_EQ(load_fit(out() + "/fit.txt").per_day.size(), 4u);
}

}  // namespace
}  // namespace flexio::cli
