#include "flexio/serialize.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "flexio/format.hpp"

namespace flexio {
namespace {

constexpr const char* kDatasetMagic = "FLEXIO-DATASET 1.0.0";
constexpr const char* kFitMagic = "FLEXIO-FIT 1.0.0";

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void scalar(const std::string& key, double v) { out_ << key << ' ' << format_double(v) << '\n'; }
  void integer(const std::string& key, long long v) { out_ << key << ' ' << v << '\n'; }
  void word(const std::string& key, const std::string& v) { out_ << key << ' ' << v << '\n'; }

  template <typename Vec>
  void vector(const std::string& key, const Vec& v) {
    out_ << key << ' ' << v.size();
    for (Eigen::Index i = 0; i < v.size(); ++i) out_ << ' ' << format_double(static_cast<double>(v(i)));
    out_ << '\n';
  }

  void matrix(const std::string& key, const Matrix& m) {
    out_ << key << ' ' << m.rows() << ' ' << m.cols();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) out_ << ' ' << format_double(m(r, c));
    }
    out_ << '\n';
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  void magic(const char* expected) {
    std::string line;
    std::getline(in_, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected) {
      throw InvalidInput(source_ + ": expected header '" + expected + "', found '" + line + "'");
    }
  }

  std::string token(const std::string& what) {
    std::string t;
    if (!(in_ >> t)) throw InvalidInput(source_ + ": unexpected end of file reading " + what);
    return t;
  }

  void key(const std::string& expected) {
    const std::string t = token(expected);
    if (t != expected) {
      throw InvalidInput(source_ + ": expected '" + expected + "', found '" + t + "'");
    }
  }

  double scalar(const std::string& k) {
    key(k);
    return parse_double(token(k), source_ + ": " + k);
  }
  long long integer(const std::string& k) {
    key(k);
    return parse_int(token(k), source_ + ": " + k);
  }
  std::string word(const std::string& k) {
    key(k);
    return token(k);
  }

  long long count(const std::string& k) {
    const long long n = parse_int(token(k), source_ + ": " + k + " size");
    if (n < 0) throw InvalidInput(source_ + ": negative size for " + k);
    return n;
  }

  Vector vector(const std::string& k) {
    key(k);
    Vector v(count(k));
    for (auto& x : v) x = parse_double(token(k), source_ + ": " + k);
    return v;
  }

  BinaryVector binary(const std::string& k) {
    key(k);
    BinaryVector v(count(k));
    for (auto& x : v) {
      const long long b = parse_int(token(k), source_ + ": " + k);
      if (b != 0 && b != 1) throw InvalidInput(source_ + ": " + k + " must hold 0 or 1");
      x = static_cast<std::uint8_t>(b);
    }
    return v;
  }

  Matrix matrix(const std::string& k) {
    key(k);
    const long long rows = count(k);
    const long long cols = count(k);
    Matrix m(rows, cols);
    for (long long r = 0; r < rows; ++r) {
      for (long long c = 0; c < cols; ++c) m(r, c) = parse_double(token(k), source_ + ": " + k);
    }
    return m;
  }

  const std::string& source() const { return source_; }

 private:
  std::istream& in_;
  std::string source_;
};

const char* scaling_name(FeatureScaling s) {
  switch (s) {
    case FeatureScaling::kStandardize:
      return "standardize";
    case FeatureScaling::kMinMaxHalf:
      return "minmax_half";
    case FeatureScaling::kNone:
      return "none";
  }
  return "none";
}

FeatureScaling parse_scaling(const std::string& s, const std::string& source) {
  if (s == "standardize") return FeatureScaling::kStandardize;
  if (s == "minmax_half") return FeatureScaling::kMinMaxHalf;
  if (s == "none") return FeatureScaling::kNone;
  throw InvalidInput(source + ": unknown feature scaling '" + s + "'");
}

void write_attributes(Writer& w, const DemandAttributes& a) {
  w.vector("d_bl", a.d_bl);
  w.vector("env_sf_plus", a.env_sf_plus);
  w.vector("env_sf_minus", a.env_sf_minus);
  w.vector("env_sd", a.env_sd);
}

DemandAttributes read_attributes(Reader& r) {
  DemandAttributes a;
  a.d_bl = r.vector("d_bl");
  a.env_sf_plus = r.vector("env_sf_plus");
  a.env_sf_minus = r.vector("env_sf_minus");
  a.env_sd = r.vector("env_sd");
  return a;
}

template <typename T>
void save_with(const std::string& path, const T& value, void (*write)(std::ostream&, const T&)) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
  write(out, value);
  if (!out) throw InvalidInput("failed writing '" + path + "'");
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  return in;
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& data) {
  data.validate();
  Writer w(out);
  out << kDatasetMagic << '\n';
  w.integer("days", static_cast<long long>(data.size()));
  w.integer("periods", data.periods());
  out << "feature_names " << data.feature_names.size();
  for (const auto& n : data.feature_names) out << ' ' << n;
  out << '\n';
  w.integer("has_tou", data.tou.empty() ? 0 : 1);
  for (std::size_t s = 0; s < data.size(); ++s) {
    const DaySample& d = data.days[s];
    w.word("date", d.date.empty() ? "-" : d.date);
    w.integer("day_index", d.day_index);
    w.integer("weekday", s < data.weekday.size() && data.weekday[s] ? 1 : 0);
    w.word("season", s < data.season.size() && !data.season[s].empty() ? data.season[s] : "-");
    w.vector("demand", d.demand);
    w.vector("gen", d.gen);
    w.matrix("features", d.features);
    if (!data.tou.empty()) w.vector("tou", data.tou[s]);
  }
  out << "end\n";
}

Dataset read_dataset(std::istream& in, const std::string& source) {
  Reader r(in, source);
  r.magic(kDatasetMagic);
  const long long days = r.integer("days");
  r.integer("periods");
  Dataset data;
  r.key("feature_names");
  const long long f = r.count("feature_names");
  for (long long i = 0; i < f; ++i) data.feature_names.push_back(r.token("feature name"));
  const bool has_tou = r.integer("has_tou") != 0;
  for (long long s = 0; s < days; ++s) {
    DaySample d;
    d.date = r.word("date");
    if (d.date == "-") d.date.clear();
    d.day_index = static_cast<int>(r.integer("day_index"));
    data.weekday.push_back(r.integer("weekday") != 0);
    std::string season = r.word("season");
    data.season.push_back(season == "-" ? std::string() : season);
    d.demand = r.vector("demand");
    d.gen = r.vector("gen");
    d.features = r.matrix("features");
    if (has_tou) data.tou.push_back(r.vector("tou"));
    data.days.push_back(std::move(d));
  }
  r.key("end");
  data.validate();
  return data;
}

void save_dataset(const std::string& path, const Dataset& data) {
  save_with<Dataset>(path, data, write_dataset);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in = open_input(path);
  return read_dataset(in, path);
}

void write_fit(std::ostream& out, const FitResult& fit) {
  Writer w(out);
  out << kFitMagic << '\n';
  w.word("mode", to_string(fit.solver_mode));
  w.integer("t_max", fit.hyper.t_max);
  w.scalar("alpha", fit.hyper.alpha);
  w.scalar("gamma_sf_plus", fit.hyper.gamma_sf_plus);
  w.scalar("gamma_sf_minus", fit.hyper.gamma_sf_minus);
  w.scalar("gamma_sd", fit.hyper.gamma_sd);
  w.integer("p_norm", fit.hyper.p_norm);
  w.scalar("training_loss", fit.training_loss);
  w.scalar("kkt_max_residual", fit.kkt_max_residual);
  w.scalar("rule_residual", fit.rule_residual);
  w.integer("iterations", fit.iterations);
  w.integer("nodes", fit.nodes);
  w.integer("converged", fit.converged ? 1 : 0);
  w.vector("d_bl", fit.d_bl);
  w.vector("weights", fit.weights);

  const KernelEnvelopeModel& m = fit.envelope_model;
  w.integer("model_days", m.days);
  w.integer("model_periods", m.periods);
  for (Family f : kFamilies) {
    const int i = static_cast<int>(f);
    const std::string name = family_name(f);
    w.scalar("beta0_" + name, m.beta0[i]);
    w.scalar("gamma_" + name, m.gamma[i]);
    w.matrix("beta_" + name, m.beta[i]);
  }
  w.word("scaling", scaling_name(m.scaler.kind));
  w.vector("scaler_offset", m.scaler.offset);
  w.vector("scaler_scale", m.scaler.scale);
  w.matrix("anchors", m.anchors);

  w.integer("per_day", static_cast<long long>(fit.per_day.size()));
  for (const FopSolution& sol : fit.per_day) {
    w.vector("d_sf_plus", sol.theta.d_sf_plus);
    w.vector("d_sf_minus", sol.theta.d_sf_minus);
    w.vector("d_sd_minus", sol.theta.d_sd_minus);
    w.vector("delta_plus", sol.theta.delta_plus);
    w.vector("delta_minus", sol.theta.delta_minus);
    const KktCertificate& c = sol.certificate;
    w.scalar("kappa", c.kappa);
    w.vector("mu_plus", c.mu_plus);
    w.vector("mu_minus", c.mu_minus);
    w.vector("mu_zero", c.mu_zero);
    w.vector("nu_plus", c.nu_plus);
    w.vector("nu_minus", c.nu_minus);
    w.vector("nu_zero", c.nu_zero);
    w.scalar("utility", sol.utility);
    w.vector("d_sf", sol.d_sf);
    w.vector("d_sd", sol.d_sd);
    w.integer("fop_nodes", sol.nodes);
  }
  w.integer("attributes", static_cast<long long>(fit.attributes.size()));
  for (const auto& a : fit.attributes) write_attributes(w, a);
  out << "end\n";
}

FitResult read_fit(std::istream& in, const std::string& source) {
  Reader r(in, source);
  r.magic(kFitMagic);
  FitResult fit;
  fit.solver_mode = parse_solver_mode(r.word("mode"));
  fit.hyper.t_max = static_cast<int>(r.integer("t_max"));
  fit.hyper.alpha = r.scalar("alpha");
  fit.hyper.gamma_sf_plus = r.scalar("gamma_sf_plus");
  fit.hyper.gamma_sf_minus = r.scalar("gamma_sf_minus");
  fit.hyper.gamma_sd = r.scalar("gamma_sd");
  fit.hyper.p_norm = static_cast<int>(r.integer("p_norm"));
  fit.training_loss = r.scalar("training_loss");
  fit.kkt_max_residual = r.scalar("kkt_max_residual");
  fit.rule_residual = r.scalar("rule_residual");
  fit.iterations = static_cast<int>(r.integer("iterations"));
  fit.nodes = static_cast<long>(r.integer("nodes"));
  fit.converged = r.integer("converged") != 0;
  fit.d_bl = r.vector("d_bl");
  fit.weights = r.vector("weights");

  KernelEnvelopeModel& m = fit.envelope_model;
  m.days = static_cast<int>(r.integer("model_days"));
  m.periods = static_cast<int>(r.integer("model_periods"));
  for (Family f : kFamilies) {
    const int i = static_cast<int>(f);
    const std::string name = family_name(f);
    m.beta0[i] = r.scalar("beta0_" + name);
    m.gamma[i] = r.scalar("gamma_" + name);
    m.beta[i] = r.matrix("beta_" + name);
  }
  m.scaler.kind = parse_scaling(r.word("scaling"), source);
  m.scaler.offset = r.vector("scaler_offset");
  m.scaler.scale = r.vector("scaler_scale");
  m.anchors = r.matrix("anchors");
  m.validate();

  const long long days = r.integer("per_day");
  for (long long s = 0; s < days; ++s) {
    FopSolution sol;
    sol.theta.d_sf_plus = r.vector("d_sf_plus");
    sol.theta.d_sf_minus = r.vector("d_sf_minus");
    sol.theta.d_sd_minus = r.vector("d_sd_minus");
    sol.theta.delta_plus = r.binary("delta_plus");
    sol.theta.delta_minus = r.binary("delta_minus");
    KktCertificate& c = sol.certificate;
    c.kappa = r.scalar("kappa");
    c.mu_plus = r.vector("mu_plus");
    c.mu_minus = r.vector("mu_minus");
    c.mu_zero = r.vector("mu_zero");
    c.nu_plus = r.vector("nu_plus");
    c.nu_minus = r.vector("nu_minus");
    c.nu_zero = r.vector("nu_zero");
    sol.utility = r.scalar("utility");
    sol.d_sf = r.vector("d_sf");
    sol.d_sd = r.vector("d_sd");
    sol.nodes = static_cast<int>(r.integer("fop_nodes"));
    fit.per_day.push_back(std::move(sol));
  }
  const long long attrs = r.integer("attributes");
  for (long long s = 0; s < attrs; ++s) fit.attributes.push_back(read_attributes(r));
  r.key("end");
  return fit;
}

void save_fit(const std::string& path, const FitResult& fit) { save_with<FitResult>(path, fit, write_fit); }

FitResult load_fit(const std::string& path) {
  std::ifstream in = open_input(path);
  return read_fit(in, path);
}

}  // namespace flexio
