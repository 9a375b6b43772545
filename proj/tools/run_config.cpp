#include "run_config.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "flexio/forecast.hpp"

namespace flexio::cli {
namespace {

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out = "invalid config:";
  for (const auto& l : lines) out += "\n  " + l;
  return out;
}

// One mapping of the config. Every lookup records its key so that leftovers
// can be reported as unknown; conversion and range problems are collected
// instead of thrown.
class Section {
 public:
  Section(YAML::Node node, std::string path, std::vector<std::string>& errors)
      : node_(std::move(node)), path_(std::move(path)), errors_(errors) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) {
      errors_.push_back(path_ + ": expected a mapping");
      node_ = YAML::Node();
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_ && node_.IsMap() && node_[key] && !node_[key].IsNull();
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    return Section(node_ && node_.IsMap() ? node_[key] : YAML::Node(), name(key), errors_);
  }

  template <class T>
  T get(const std::string& key, T fallback, const std::function<bool(const T&)>& ok = {},
        const std::string& requirement = "") {
    if (!has(key)) return fallback;
    T value;
    try {
      value = node_[key].as<T>();
    } catch (const YAML::Exception&) {
      errors_.push_back(name(key) + ": expected " + type_name<T>());
      return fallback;
    }
    if (ok && !ok(value)) {
      errors_.push_back(name(key) + ": must be " + requirement);
      return fallback;
    }
    return value;
  }

  template <class T>
  std::vector<T> list(const std::string& key, std::vector<T> fallback,
                      const std::function<bool(const T&)>& ok = {}, const std::string& requirement = "",
                      bool nonempty = false) {
    if (!has(key)) return fallback;
    const YAML::Node n = node_[key];
    if (!n.IsSequence()) {
      errors_.push_back(name(key) + ": expected a list of " + type_name<T>());
      return fallback;
    }
    std::vector<T> out;
    bool good = true;
    for (std::size_t i = 0; i < n.size(); ++i) {
      const std::string where = name(key) + "[" + std::to_string(i) + "]";
      try {
        out.push_back(n[i].as<T>());
      } catch (const YAML::Exception&) {
        errors_.push_back(where + ": expected " + type_name<T>());
        good = false;
        continue;
      }
      if (ok && !ok(out.back())) {
        errors_.push_back(where + ": must be " + requirement);
        good = false;
      }
    }
    if (nonempty && out.empty()) {
      errors_.push_back(name(key) + ": must not be empty");
      good = false;
    }
    return good ? out : fallback;
  }

  template <class E>
  E choice(const std::string& key, E fallback, const std::vector<std::pair<std::string, E>>& options) {
    if (!has(key)) return fallback;
    std::string text;
    try {
      text = node_[key].as<std::string>();
    } catch (const YAML::Exception&) {
      text.clear();
    }
    std::string allowed;
    for (const auto& [label, value] : options) {
      if (label == text) return value;
      allowed += (allowed.empty() ? "" : ", ") + label;
    }
    errors_.push_back(name(key) + ": expected one of " + allowed);
    return fallback;
  }

  void add_error(const std::string& key, const std::string& message) { errors_.push_back(name(key) + ": " + message); }

  // Reports keys that were never looked up.
  void finish() {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (!seen_.count(key)) errors_.push_back(name(key) + ": unknown key");
    }
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  template <class T>
  static std::string type_name() {
    if constexpr (std::is_same_v<T, bool>) {
      return "true or false";
    } else if constexpr (std::is_integral_v<T>) {
      return "an integer";
    } else if constexpr (std::is_floating_point_v<T>) {
      return "a number";
    } else {
      return "a string";
    }
  }

  YAML::Node node_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

const std::function<bool(const double&)> kNonneg = [](const double& v) { return v >= 0.0; };
const std::function<bool(const double&)> kPositive = [](const double& v) { return v > 0.0; };
const std::function<bool(const int&)> kPositiveInt = [](const int& v) { return v >= 1; };
const std::function<bool(const int&)> kNonnegInt = [](const int& v) { return v >= 0; };

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty()) return path;
  const std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

std::array<double, 3> triple(Section& s, const std::string& key, std::array<double, 3> fallback,
                             const std::function<bool(const double&)>& ok, const std::string& requirement) {
  const std::vector<double> v = s.list<double>(key, {fallback.begin(), fallback.end()}, ok, requirement);
  if (v.size() != 3) {
    s.add_error(key, "expected three values (shift up, shift down, shed)");
    return fallback;
  }
  return {v[0], v[1], v[2]};
}

// Collects the first complaint of a library validator.
void check(std::vector<std::string>& errors, const std::string& where, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const InvalidInput& e) {
    errors.push_back(where + ": " + e.what());
  }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : InvalidInput(join_lines(problems)), problems_(std::move(problems)) {}

TariffSpec TariffConfig::build(int periods) const {
  TariffSpec t;
  t.flat = flat;
  t.tou = tou_schedule(periods, peak, offpeak, peak_windows);
  t.shed_rule = shed_rule;
  t.shed_cost = shed_cost;
  return t;
}

std::vector<GridPoint> GridConfig::points(int periods) const {
  std::vector<GridPoint> out;
  for (int t : t_max) {
    if (t > periods) continue;
    for (double a : alpha) {
      for (double g0 : gamma_sf_plus) {
        for (double g1 : gamma_sf_minus) {
          for (double g2 : gamma_sd) out.push_back(GridPoint{t, a, {g0, g1, g2}});
        }
      }
    }
  }
  return out;
}

RunConfig parse_run_config(const std::string& text, const std::string& base_dir, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError({source + ": " + e.what()});
  }
  std::vector<std::string> errors;
  RunConfig c;
  c.source = source;
  Section top(root, "", errors);
  c.seed = top.get<std::uint64_t>("seed", c.seed);
  const int periods = top.get<int>("periods", 24, kPositiveInt, ">= 1");

  {
    Section d = top.child("data");
    c.data_path = resolve(d.get<std::string>("path", ""), base_dir);
    CsvSchema& s = c.schema;
    s.periods = periods;
    s.date_column = d.get<std::string>("date_column", s.date_column);
    s.hour_column = d.get<std::string>("hour_column", s.hour_column);
    s.demand_column = d.get<std::string>("demand_column", s.demand_column);
    s.generation_column = d.get<std::string>("generation_column", s.generation_column);
    s.tou_column = d.get<std::string>("tou_column", s.tou_column);
    s.feature_columns = d.list<std::string>("features", {});
    s.weekdays_only = d.get<bool>("weekdays_only", false);
    s.aggregation = d.choice<Aggregation>("aggregation", Aggregation::kMean,
                                          {{"mean", Aggregation::kMean}, {"sum", Aggregation::kSum}});
    s.tdiff_temperature = d.get<std::string>("tdiff_temperature", "");
    s.tdiff_apparent = d.get<std::string>("tdiff_apparent", "");
    if (s.tdiff_temperature.empty() != s.tdiff_apparent.empty()) {
      d.add_error("tdiff_apparent", "must be given together with tdiff_temperature");
    }
    d.finish();
  }
  {
    Section w = top.child("window");
    c.train_days = w.get<int>("train_days", 0, kNonnegInt, ">= 0");
    c.eval_days = w.get<int>("eval_days", 5, kPositiveInt, ">= 1");
    w.finish();
  }
  {
    Section t = top.child("tariff");
    TariffConfig& tc = c.tariff;
    tc.flat = t.get<double>("flat", tc.flat, kPositive, "> 0");
    tc.peak = t.get<double>("peak", tc.peak, kNonneg, ">= 0");
    tc.offpeak = t.get<double>("offpeak", tc.offpeak, kNonneg, ">= 0");
    if (t.has("peak_windows")) {
      std::vector<std::vector<int>> raw = t.list<std::vector<int>>("peak_windows", {});
      tc.peak_windows.clear();
      for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto& w = raw[i];
        if (w.size() != 2 || w[0] < 0 || w[1] > periods || w[0] >= w[1]) {
          t.add_error("peak_windows[" + std::to_string(i) + "]",
                      "expected [first, end) with 0 <= first < end <= " + std::to_string(periods));
          continue;
        }
        tc.peak_windows.emplace_back(w[0], w[1]);
      }
    }
    tc.shed_rule = t.choice<ShedPriceRule>(
        "shed_rule", tc.shed_rule,
        {{"mean-shift-up-incentive", ShedPriceRule::kMeanShiftUpIncentive}, {"zero", ShedPriceRule::kZero}});
    if (t.has("shed_cost")) tc.shed_cost = t.get<double>("shed_cost", 1.0, kPositive, "> 0");
    t.finish();
  }
  {
    Section s = top.child("simulate");
    SyntheticSpec& sp = c.simulate;
    sp.periods = periods;
    sp.days = s.get<int>("days", 45, kPositiveInt, ">= 1");
    sp.rule = s.choice<EnvelopeRuleKind>("rule", sp.rule,
                                         {{"constant", EnvelopeRuleKind::kConstant}, {"kernel", EnvelopeRuleKind::kKernel}});
    sp.envelope = triple(s, "envelope", sp.envelope, kNonneg, ">= 0");
    sp.gamma = triple(s, "gamma", sp.gamma, kPositive, "> 0");
    sp.kernel_scale = s.get<double>("kernel_scale", sp.kernel_scale, kNonneg, ">= 0");
    sp.anchor_days = s.get<int>("anchor_days", sp.anchor_days, kNonnegInt, ">= 0");
    sp.base_load = s.get<double>("base_load", sp.base_load, kNonneg, ">= 0");
    if (s.has("baseload")) {
      const std::vector<double> v = s.list<double>("baseload", {}, kNonneg, ">= 0");
      if (static_cast<int>(v.size()) != periods) {
        s.add_error("baseload", "expected " + std::to_string(periods) + " values");
      } else {
        sp.d_bl = Eigen::Map<const Vector>(v.data(), periods);
      }
    }
    sp.tou_jitter = s.get<double>("tou_jitter", sp.tou_jitter, kNonneg, ">= 0");
    sp.gen_peak = s.get<double>("gen_peak", sp.gen_peak, kNonneg, ">= 0");
    sp.temp_mean = s.get<double>("temp_mean", sp.temp_mean);
    sp.temp_day_sd = s.get<double>("temp_day_sd", sp.temp_day_sd, kNonneg, ">= 0");
    sp.temp_amplitude = s.get<double>("temp_amplitude", sp.temp_amplitude, kNonneg, ">= 0");
    sp.noise_sigma = s.get<double>("noise_sigma", sp.noise_sigma, kNonneg, ">= 0");
    sp.t_max = s.get<int>("t_max", periods, kNonnegInt, ">= 0");
    sp.start_date = s.get<std::string>("start_date", sp.start_date);
    s.finish();
  }
  {
    Section f = top.child("fit");
    FitConfig& fc = c.fit;
    fc.solver_mode = f.choice<SolverMode>("mode", fc.solver_mode,
                                          {{"exact", SolverMode::kExact}, {"alternating", SolverMode::kAlternating}});
    fc.hyper.t_max = f.get<int>("t_max", periods, kPositiveInt, ">= 1");
    fc.hyper.alpha = f.get<double>("alpha", fc.hyper.alpha, kNonneg, ">= 0");
    const auto g = triple(f, "gamma", {1.0, 1.0, 1.0}, kPositive, "> 0");
    fc.hyper.gamma_sf_plus = g[0];
    fc.hyper.gamma_sf_minus = g[1];
    fc.hyper.gamma_sd = g[2];
    fc.max_iters = f.get<int>("max_iters", fc.max_iters, kPositiveInt, ">= 1");
    fc.tol_obj = f.get<double>("tol_obj", fc.tol_obj, kPositive, "> 0");
    fc.tol_kkt = f.get<double>("tol_kkt", fc.tol_kkt, kPositive, "> 0");
    fc.ridge = f.get<double>("ridge", fc.ridge, kNonneg, ">= 0");
    fc.scaling = f.choice<FeatureScaling>("scaling", fc.scaling,
                                          {{"standardize", FeatureScaling::kStandardize},
                                           {"min-max-half", FeatureScaling::kMinMaxHalf},
                                           {"none", FeatureScaling::kNone}});
    fc.max_nodes = f.get<long>("max_nodes", fc.max_nodes, [](const long& v) { return v >= 1; }, ">= 1");
    fc.day_nodes = f.get<long>("day_nodes", fc.day_nodes, [](const long& v) { return v >= 1; }, ">= 1");
    fc.threads = f.get<int>("threads", fc.threads, kNonnegInt, ">= 0");
    c.bounds = f.choice<BoundsRule>("bounds", c.bounds,
                                    {{"observed-demand", BoundsRule::kObservedDemand}, {"zero", BoundsRule::kZero}});
    f.finish();
  }
  {
    Section f = top.child("forecast");
    c.quantiles = f.get<bool>("quantiles", false);
    const Vector def = default_quantile_levels();
    std::vector<double> levels = f.list<double>(
        "levels", {def.data(), def.data() + def.size()}, [](const double& v) { return v > 0.0 && v < 1.0; },
        "in (0, 1)", true);
    for (std::size_t i = 1; i < levels.size(); ++i) {
      if (!(levels[i] > levels[i - 1])) {
        f.add_error("levels", "must be strictly increasing");
        break;
      }
    }
    c.levels = Eigen::Map<const Vector>(levels.data(), static_cast<Eigen::Index>(levels.size()));
    c.fit_path = resolve(f.get<std::string>("fit", ""), base_dir);
    f.finish();
  }
  {
    Section e = top.child("evaluate");
    c.forecast_path = resolve(e.get<std::string>("forecast", ""), base_dir);
    c.baseline = e.choice<bool>("baseline", false, {{"none", false}, {"seasonal-naive", true}});
    c.naive_lookback = e.get<int>("lookback", c.naive_lookback, kPositiveInt, ">= 1");
    e.finish();
  }
  {
    Section g = top.child("grid");
    GridConfig& gc = c.grid;
    gc.t_max = g.list<int>("t_max", gc.t_max, kPositiveInt, ">= 1", true);
    gc.alpha = g.list<double>("alpha", gc.alpha, kNonneg, ">= 0", true);
    gc.gamma_sf_plus = g.list<double>("gamma_sf_plus", gc.gamma_sf_plus, kPositive, "> 0", true);
    gc.gamma_sf_minus = g.list<double>("gamma_sf_minus", gc.gamma_sf_minus, kPositive, "> 0", true);
    gc.gamma_sd = g.list<double>("gamma_sd", gc.gamma_sd, kPositive, "> 0", true);
    gc.holdout_days = g.get<int>("holdout_days", gc.holdout_days, kPositiveInt, ">= 1");
    g.finish();
  }
  top.finish();

  // Cross-field checks run on whatever survived the field checks.
  if (c.fit.hyper.t_max > periods) errors.push_back("fit.t_max: must be <= periods (" + std::to_string(periods) + ")");
  if (c.simulate.t_max > periods) {
    errors.push_back("simulate.t_max: must be <= periods (" + std::to_string(periods) + ")");
  }
  if (c.simulate.anchor_days > c.simulate.days) errors.push_back("simulate.anchor_days: must be <= simulate.days");
  if (c.grid.points(periods).empty()) errors.push_back("grid.t_max: no value <= periods (" + std::to_string(periods) + ")");
  if (errors.empty()) {
    c.simulate.flat_price = c.tariff.flat;
    c.simulate.peak_price = c.tariff.peak;
    c.simulate.offpeak_price = c.tariff.offpeak;
    c.simulate.peak_windows = c.tariff.peak_windows;
    c.simulate.shed_rule = c.tariff.shed_rule;
    c.simulate.shed_cost = c.tariff.shed_cost;
    c.simulate.seed = c.seed;
    c.fit.seed = c.seed;
    check(errors, "simulate", [&] { c.simulate.validate(); });
    check(errors, "fit", [&] { c.fit.validate(periods); });
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path + ": cannot open config"});
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string dir = std::filesystem::path(path).parent_path().string();
  return parse_run_config(buf.str(), dir, path);
}

Window resolve_window(const RunConfig& config, std::size_t days, bool need_eval) {
  Window w;
  const auto eval = static_cast<std::size_t>(config.eval_days);
  if (config.train_days > 0) {
    w.train_count = static_cast<std::size_t>(config.train_days);
  } else {
    w.train_count = days > eval ? days - eval : 0;
  }
  if (w.train_count == 0 || w.train_count > days) {
    throw InvalidInput("window: " + std::to_string(days) + " days of data cannot hold a training window of " +
                       std::to_string(config.train_days > 0 ? config.train_days : 0) + " days plus " +
                       std::to_string(eval) + " evaluation days");
  }
  w.eval_first = w.train_count;
  w.eval_count = std::min(eval, days - w.train_count);
  if (need_eval && w.eval_count < eval) {
    throw InvalidInput("window: evaluation needs " + std::to_string(eval) + " days after the " +
                       std::to_string(w.train_count) + " training days, but only " +
                       std::to_string(days - w.train_count) + " remain");
  }
  return w;
}

}  // namespace flexio::cli
