#include "flexio/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "flexio/format.hpp"
#include "flexio/simd/kernels.hpp"

namespace flexio {
namespace {

void check_pair(const Vector& a, const Vector& b, const char* what) {
  if (a.size() == 0 || a.size() != b.size()) {
    throw InvalidInput(std::string(what) + ": vectors must be nonempty and of equal length");
  }
}

void check_quantiles(const Vector& levels, const Vector& values) {
  if (levels.size() == 0 || levels.size() != values.size()) {
    throw InvalidInput("crps: one value per level required");
  }
  for (Eigen::Index q = 0; q < levels.size(); ++q) {
    if (!(levels(q) > 0.0 && levels(q) < 1.0)) throw InvalidInput("crps: levels must be in (0,1)");
    if (q > 0 && values(q) < values(q - 1)) {
      throw InvalidInput("crps: quantile values must be nondecreasing");
    }
  }
}

}  // namespace

double mae(const Vector& truth, const Vector& forecast) {
  check_pair(truth, forecast, "mae");
  const auto& k = simd::active_kernels();
  return k.abs_diff_sum(truth.data(), forecast.data(), static_cast<std::size_t>(truth.size())) /
         static_cast<double>(truth.size());
}

double rmse(const Vector& truth, const Vector& forecast) {
  check_pair(truth, forecast, "rmse");
  const auto& k = simd::active_kernels();
  return std::sqrt(k.sq_diff_sum(truth.data(), forecast.data(), static_cast<std::size_t>(truth.size())) /
                   static_cast<double>(truth.size()));
}

double pinball(double level, double value, double y) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidInput("pinball: level must be in (0,1)");
  return y >= value ? level * (y - value) : (1.0 - level) * (value - y);
}

double crps_from_quantiles(const Vector& levels, const Vector& values, double y) {
  check_quantiles(levels, values);
  double acc = 0.0;
  for (Eigen::Index q = 0; q < levels.size(); ++q) {
    const double below = y < values(q) ? 1.0 : 0.0;
    acc += (below - levels(q)) * (values(q) - y);
  }
  return 2.0 * acc / static_cast<double>(levels.size());
}

double crps_via_pinball(const Vector& levels, const Vector& values, double y) {
  check_quantiles(levels, values);
  double acc = 0.0;
  for (Eigen::Index q = 0; q < levels.size(); ++q) acc += pinball(levels(q), values(q), y);
  return 2.0 * acc / static_cast<double>(levels.size());
}

Vector seasonal_naive(const Matrix& history, int lookback) {
  if (lookback < 1) throw InvalidInput("seasonal naive: lookback must be >= 1");
  if (history.rows() < lookback) {
    throw InvalidInput("seasonal naive: need " + std::to_string(lookback) + " days of history, got " +
                       std::to_string(history.rows()));
  }
  return history.bottomRows(lookback).colwise().mean().transpose();
}

EvalReport evaluate(const std::string& method, const Matrix& truth, const Matrix& point,
                    const Vector& levels, const std::vector<Matrix>& quantiles) {
  if (truth.size() == 0 || truth.rows() != point.rows() || truth.cols() != point.cols()) {
    throw InvalidInput("evaluate: truth and forecast shapes differ");
  }
  const auto D = truth.rows();
  const auto T = truth.cols();
  EvalReport r;
  r.method = method;
  const Matrix err = point - truth;
  r.mae = err.cwiseAbs().mean();
  r.rmse = std::sqrt(err.squaredNorm() / static_cast<double>(err.size()));
  r.mae_per_hour = err.cwiseAbs().colwise().mean().transpose();
  r.rmse_per_hour = err.cwiseAbs2().colwise().mean().cwiseSqrt().transpose();
  if (quantiles.empty()) return r;

  if (static_cast<Eigen::Index>(quantiles.size()) != D) {
    throw InvalidInput("evaluate: one quantile matrix per forecast day required");
  }
  const auto& kernels = simd::active_kernels();
  r.has_quantiles = true;
  r.levels = levels;
  r.pinball_per_level = Vector::Zero(levels.size());
  r.crps_per_hour = Vector::Zero(T);
  for (Eigen::Index d = 0; d < D; ++d) {
    const Matrix& qm = quantiles[d];
    if (qm.rows() != levels.size() || qm.cols() != T) {
      throw InvalidInput("evaluate: quantile matrix shape differs from levels x periods");
    }
    for (Eigen::Index t = 0; t < T; ++t) {
      r.crps_per_hour(t) += crps_from_quantiles(levels, qm.col(t), truth(d, t));
    }
    const Vector y = truth.row(d).transpose();
    for (Eigen::Index q = 0; q < levels.size(); ++q) {
      const Vector row = qm.row(q).transpose();
      r.pinball_per_level(q) +=
          kernels.pinball_sum(levels(q), row.data(), y.data(), static_cast<std::size_t>(T));
    }
  }
  const double cells = static_cast<double>(D * T);
  r.crps_mean = r.crps_per_hour.sum() / cells;
  r.crps_per_hour /= static_cast<double>(D);
  r.crps_hour_mean = r.crps_per_hour.mean();
  r.pinball_per_level /= cells;
  return r;
}

void write_report_csv(std::ostream& out, const std::vector<EvalReport>& reports) {
  out << "method,metric,hour,value\n";
  for (const auto& r : reports) {
    auto row = [&](const char* metric, const std::string& hour, double v) {
      out << r.method << ',' << metric << ',' << hour << ',' << format_double(v) << '\n';
    };
    row("mae", "all", r.mae);
    row("rmse", "all", r.rmse);
    if (r.has_quantiles) {
      row("crps", "all", r.crps_mean);
      row("crps_hourly_mean", "all", r.crps_hour_mean);
    }
    for (Eigen::Index t = 0; t < r.mae_per_hour.size(); ++t) {
      row("mae", std::to_string(t), r.mae_per_hour(t));
      row("rmse", std::to_string(t), r.rmse_per_hour(t));
      if (r.has_quantiles) row("crps", std::to_string(t), r.crps_per_hour(t));
    }
    for (Eigen::Index q = 0; q < r.levels.size(); ++q) {
      out << r.method << ",pinball_" << format_double(r.levels(q)) << ",all,"
          << format_double(r.pinball_per_level(q)) << '\n';
    }
  }
}

void write_report_table(std::ostream& out, const std::vector<EvalReport>& reports) {
  out << std::left << std::setw(18) << "method" << std::right << std::setw(12) << "MAE"
      << std::setw(12) << "RMSE" << std::setw(12) << "CRPS" << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& r : reports) {
    out << std::left << std::setw(18) << r.method << std::right << std::setw(12) << r.mae
        << std::setw(12) << r.rmse;
    if (r.has_quantiles) {
      out << std::setw(12) << r.crps_mean;
    } else {
      out << std::setw(12) << "-";
    }
    out << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

}  // namespace flexio
