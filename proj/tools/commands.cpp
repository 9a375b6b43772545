#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "flexio/format.hpp"
#include "flexio/forecast.hpp"
#include "flexio/metrics.hpp"
#include "flexio/pipeline.hpp"
#include "flexio/serialize.hpp"

namespace flexio::cli {
namespace {

namespace fs = std::filesystem;

std::string out_file(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  return (fs::path(dir) / name).string();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput(path + ": cannot open for writing");
  return out;
}

Dataset load_data(const RunConfig& c) {
  if (c.data_path.empty()) throw InvalidInput("data.path: required by this command");
  return load_csv(c.data_path, c.schema);
}

std::vector<int> labels(std::size_t first, std::size_t count) {
  std::vector<int> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(static_cast<int>(first + i));
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct ForecastTable {
  Matrix point;  // eval days x periods
  Vector levels;
  std::vector<Matrix> quantiles;
};

// Reads forecast.csv; a data file in the input layout is read as a point
// forecast equal to its demand.
ForecastTable read_forecast(const std::string& path, const RunConfig& c, const Window& w, Eigen::Index T) {
  std::ifstream in(path);
  if (!in) throw InvalidInput(path + ": cannot open forecast");
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split(line);
  const auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
  };

  ForecastTable out;
  const auto D = static_cast<Eigen::Index>(w.eval_count);
  out.point = Matrix::Constant(D, T, std::numeric_limits<double>::quiet_NaN());
  if (col("net") < 0) {
    const Dataset data = load_csv(path, c.schema);
    if (data.size() < w.eval_first + w.eval_count || data.periods() != T) {
      throw InvalidInput(path + ": does not cover the evaluation window");
    }
    for (Eigen::Index d = 0; d < D; ++d) {
      out.point.row(d) = data.days[w.eval_first + static_cast<std::size_t>(d)].demand.transpose();
    }
    return out;
  }

  const int day_col = col("day");
  const int hour_col = col("hour");
  const int net_col = col("net");
  if (day_col < 0 || hour_col < 0) throw InvalidInput(path + ": missing day or hour column");
  std::vector<int> q_cols;
  std::vector<double> levels;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i].rfind("q_", 0) == 0) {
      q_cols.push_back(static_cast<int>(i));
      levels.push_back(parse_double(header[i].substr(2), path + ": column " + header[i]) / 100.0);
    }
  }
  out.levels = Eigen::Map<const Vector>(levels.data(), static_cast<Eigen::Index>(levels.size()));
  const auto Q = out.levels.size();
  if (Q > 0) out.quantiles.assign(D, Matrix::Constant(Q, T, std::numeric_limits<double>::quiet_NaN()));

  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    const std::string where = path + ":" + std::to_string(row);
    if (fields.size() != header.size()) throw InvalidInput(where + ": expected " + std::to_string(header.size()) + " fields");
    const long long day = parse_int(fields[day_col], where + " day");
    const long long hour = parse_int(fields[hour_col], where + " hour");
    const long long d = day - static_cast<long long>(w.eval_first);
    if (d < 0 || d >= D) continue;
    if (hour < 0 || hour >= T) throw InvalidInput(where + ": hour outside [0, " + std::to_string(T) + ")");
    out.point(d, hour) = parse_double(fields[net_col], where + " net");
    for (Eigen::Index q = 0; q < Q; ++q) {
      out.quantiles[d](q, hour) = parse_double(fields[q_cols[q]], where + " " + header[q_cols[q]]);
    }
  }
  for (Eigen::Index d = 0; d < D; ++d) {
    for (Eigen::Index t = 0; t < T; ++t) {
      if (std::isnan(out.point(d, t))) {
        throw InvalidInput(path + ": no forecast for day " + std::to_string(w.eval_first + d) + " hour " +
                           std::to_string(t));
      }
    }
  }
  return out;
}

void write_summary(std::ostream& log, const FitResult& f) {
  log << "mode " << to_string(f.solver_mode) << ", t_max " << f.hyper.t_max << ", alpha "
      << format_double(f.hyper.alpha) << '\n'
      << "training loss " << format_double(f.training_loss) << '\n'
      << "max KKT residual " << format_double(f.kkt_max_residual) << '\n'
      << "iterations " << f.iterations << ", nodes " << f.nodes << ", converged "
      << (f.converged ? "yes" : "no") << '\n';
}

}  // namespace

void apply_overrides(RunConfig& config, const Overrides& flags) {
  if (flags.seed) {
    config.seed = *flags.seed;
    config.simulate.seed = *flags.seed;
    config.fit.seed = *flags.seed;
  }
  if (flags.mode) config.fit.solver_mode = *flags.mode;
  if (flags.quantiles) config.quantiles = true;
  if (flags.baseline) {
    if (*flags.baseline != "seasonal-naive") {
      throw InvalidInput("--baseline: only seasonal-naive is available");
    }
    config.baseline = true;
  }
}

void cmd_simulate(const RunConfig& config, const std::string& out_dir, std::ostream& log) {
  const SyntheticData sim = generate_synthetic(config.simulate);
  const std::string data_path = out_file(out_dir, "data.csv");
  save_csv(data_path, sim.dataset);

  const std::string truth_path = out_file(out_dir, "truth.csv");
  std::ofstream out = open_out(truth_path);
  out << "day,date,hour,d_bl,env_sf_plus,env_sf_minus,env_sd,d_sf_plus,d_sf_minus,d_sd_minus,generation,"
         "net_demand\n";
  for (std::size_t s = 0; s < sim.dataset.size(); ++s) {
    const DaySample& day = sim.dataset.days[s];
    const DemandAttributes& a = sim.truth[s];
    const FlexDecision& th = sim.decisions[s];
    for (Eigen::Index t = 0; t < day.periods(); ++t) {
      out << s << ',' << day.date << ',' << t;
      for (double v : {a.d_bl(t), a.env_sf_plus(t), a.env_sf_minus(t), a.env_sd(t), th.d_sf_plus(t),
                       th.d_sf_minus(t), th.d_sd_minus(t), day.gen(t), day.demand(t)}) {
        out << ',' << format_double(v);
      }
      out << '\n';
    }
  }
  log << "simulated " << sim.dataset.size() << " days of " << sim.dataset.periods() << " periods\n"
      << "wrote " << data_path << '\n'
      << "wrote " << truth_path << '\n';
}

void cmd_fit(const RunConfig& config, const std::string& out_dir, std::ostream& log) {
  const Dataset data = load_data(config);
  const Window w = resolve_window(config, data.size(), false);
  const Dataset train = data.slice(w.train_first, w.train_count);
  const TariffSpec tariff = config.tariff.build(static_cast<int>(data.periods()));
  const FitResult f = fit_dataset(train, config.fit, tariff, config.bounds);

  const std::string fit_path = out_file(out_dir, "fit.txt");
  save_fit(fit_path, f);
  const std::string comp_path = out_file(out_dir, "components.csv");
  std::ofstream out = open_out(comp_path);
  out << "day,date,hour,demand,fitted,baseload_net,flexible,shift_up,shift_down,shed_kept\n";
  for (std::size_t s = 0; s < train.size(); ++s) {
    const DaySample& day = train.days[s];
    const FopSolution& sol = f.per_day[s];
    for (Eigen::Index t = 0; t < day.periods(); ++t) {
      const double base = f.d_bl(t) - day.gen(t);
      const double flex = sol.d_sf(t) + sol.d_sd(t);
      out << w.train_first + s << ',' << day.date << ',' << t;
      for (double v : {day.demand(t), base + flex, base, flex, sol.theta.d_sf_plus(t), sol.theta.d_sf_minus(t),
                       sol.d_sd(t)}) {
        out << ',' << format_double(v);
      }
      out << '\n';
    }
  }
  log << "fitted " << train.size() << " days\n";
  write_summary(log, f);
  log << "wrote " << fit_path << '\n' << "wrote " << comp_path << '\n';
}

void cmd_forecast(const RunConfig& config, const std::string& out_dir, std::ostream& log) {
  const Dataset data = load_data(config);
  const Window w = resolve_window(config, data.size(), true);
  const std::string fit_path = config.fit_path.empty() ? out_file(out_dir, "fit.txt") : config.fit_path;
  const FitResult f = load_fit(fit_path);
  const Dataset train = data.slice(w.train_first, w.train_count);
  if (f.per_day.size() != train.size()) {
    throw InvalidInput(fit_path + ": fitted on " + std::to_string(f.per_day.size()) +
                       " days but the training window has " + std::to_string(train.size()));
  }
  const Dataset target = data.slice(w.eval_first, w.eval_count);
  const TariffSpec tariff = config.tariff.build(static_cast<int>(data.periods()));
  const std::vector<Forecast> fc =
      forecast_dataset(f, train, target, tariff, config.quantiles ? config.levels : Vector(), config.bounds);

  const std::string path = out_file(out_dir, "forecast.csv");
  std::ofstream out = open_out(path);
  write_forecast_csv(out, fc, labels(w.eval_first, w.eval_count));
  log << "forecast " << fc.size() << " days from day " << w.eval_first
      << (config.quantiles ? " with quantiles\n" : "\n") << "wrote " << path << '\n';
}

void cmd_evaluate(const RunConfig& config, const std::string& out_dir, std::ostream& log) {
  const Dataset data = load_data(config);
  const Window w = resolve_window(config, data.size(), true);
  const Eigen::Index T = data.periods();
  const Matrix truth = demand_matrix(data.slice(w.eval_first, w.eval_count));
  const std::string path = config.forecast_path.empty() ? out_file(out_dir, "forecast.csv") : config.forecast_path;
  const ForecastTable fc = read_forecast(path, config, w, T);

  std::vector<EvalReport> reports;
  reports.push_back(evaluate("io", truth, fc.point, fc.levels, fc.quantiles));
  if (config.baseline) {
    const Matrix history = demand_matrix(data.slice(w.train_first, w.train_count));
    const Vector naive = seasonal_naive(history, config.naive_lookback);
    const Matrix point = naive.transpose().replicate(truth.rows(), 1);
    reports.push_back(evaluate("seasonal-naive", truth, point));
  }
  const std::string out_path = out_file(out_dir, "evaluation.csv");
  std::ofstream out = open_out(out_path);
  write_report_csv(out, reports);
  write_report_table(log, reports);
  log << "wrote " << out_path << '\n';
}

void cmd_gridsearch(const RunConfig& config, const std::string& out_dir, std::ostream& log) {
  const Dataset data = load_data(config);
  const Window w = resolve_window(config, data.size(), false);
  const Dataset train = data.slice(w.train_first, w.train_count);
  const auto T = static_cast<int>(data.periods());
  const std::vector<GridPoint> grid = config.grid.points(T);
  const GridSearchResult r =
      grid_search(train, grid, config.fit, config.tariff.build(T), config.grid.holdout_days, config.bounds);

  const std::string grid_path = out_file(out_dir, "grid.csv");
  std::ofstream out = open_out(grid_path);
  out << "rank,t_max,alpha,gamma_sf_plus,gamma_sf_minus,gamma_sd,mae\n";
  for (std::size_t i = 0; i < r.ranked.size(); ++i) {
    const GridScore& s = r.ranked[i];
    out << i + 1 << ',' << s.point.t_max << ',' << format_double(s.point.alpha) << ','
        << format_double(s.point.gamma[0]) << ',' << format_double(s.point.gamma[1]) << ','
        << format_double(s.point.gamma[2]) << ',' << format_double(s.mae) << '\n';
  }
  const std::string fit_path = out_file(out_dir, "fit.txt");
  save_fit(fit_path, r.best_fit);
  const GridPoint& best = r.ranked.front().point;
  log << "scored " << r.ranked.size() << " grid points on the last " << config.grid.holdout_days
      << " training days\n"
      << "best: t_max " << best.t_max << ", alpha " << format_double(best.alpha) << ", gamma "
      << format_double(best.gamma[0]) << ' ' << format_double(best.gamma[1]) << ' ' << format_double(best.gamma[2])
      << ", holdout MAE " << format_double(r.ranked.front().mae) << '\n';
  write_summary(log, r.best_fit);
  log << "wrote " << grid_path << '\n' << "wrote " << fit_path << '\n';
}

}  // namespace flexio::cli
