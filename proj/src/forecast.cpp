#include "flexio/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "flexio/fop.hpp"
#include "flexio/format.hpp"
#include "flexio/kernel.hpp"

namespace flexio {

Forecast point_forecast(const FitResult& fit, const ForecastInputs& day, int t_max) {
  const auto T = fit.d_bl.size();
  day.prices.validate(T);
  day.costs.validate(T);
  day.bounds.validate(T);
  check_length(day.gen, T, "forecast: gen");
  check_finite(day.gen, "forecast: gen");
  if (day.features.rows() != T) throw InvalidInput("forecast: features need one row per period");

  const EnvelopeForecast env = envelope_forecast(fit.envelope_model, day.features, day.bounds);
  DemandAttributes attrs{fit.d_bl, env.sf_plus, env.sf_minus, env.sd};
  const FopSolution sol = solve_fop(day.prices, day.costs, attrs, t_max, day.gen);

  Forecast f;
  f.shift_up = sol.theta.d_sf_plus;
  f.shift_down = sol.theta.d_sf_minus;
  f.shed_kept = sol.d_sd;
  f.flexible = f.shift_up - f.shift_down + f.shed_kept;
  f.baseload_net = fit.d_bl - day.gen;
  f.net = f.baseload_net + f.flexible;
  return f;
}

FlexBounds forecast_bounds(const std::vector<DaySample>& train) {
  if (train.empty()) throw InvalidInput("forecast bounds: no training days");
  Vector k = Vector::Zero(train.front().periods());
  for (const auto& d : train) {
    check_length(d.demand, k.size(), "forecast bounds: demand");
    k = k.cwiseMax(d.demand.cwiseAbs());
  }
  return FlexBounds{k, k, k};
}

Matrix training_residuals(const FitResult& fit, const std::vector<DaySample>& train) {
  if (fit.per_day.size() != train.size()) {
    throw InvalidInput("residuals: fit and data disagree on the number of days");
  }
  const auto T = fit.d_bl.size();
  Matrix out(static_cast<Eigen::Index>(train.size()), T);
  for (std::size_t s = 0; s < train.size(); ++s) {
    const auto& sol = fit.per_day[s];
    out.row(static_cast<Eigen::Index>(s)) =
        (train[s].demand - (fit.d_bl + sol.d_sf + sol.d_sd - train[s].gen)).transpose();
  }
  return out;
}

Matrix quantile_forecast(const Vector& point, const Matrix& residuals, const Vector& levels) {
  constexpr Eigen::Index kMinDays = 5;
  if (residuals.rows() < kMinDays) {
    throw InvalidInput("quantiles: need at least 5 residual days, got " +
                       std::to_string(residuals.rows()));
  }
  if (residuals.cols() != point.size()) throw InvalidInput("quantiles: residual width mismatch");
  if (!residuals.allFinite()) throw InvalidInput("quantiles: residuals must be finite");
  for (Eigen::Index q = 0; q < levels.size(); ++q) {
    if (!(levels(q) > 0.0 && levels(q) < 1.0)) throw InvalidInput("quantiles: levels must be in (0,1)");
    if (q > 0 && !(levels(q) > levels(q - 1))) {
      throw InvalidInput("quantiles: levels must be strictly increasing");
    }
  }
  const auto n = residuals.rows();
  Matrix out(levels.size(), point.size());
  std::vector<double> col(static_cast<std::size_t>(n));
  for (Eigen::Index t = 0; t < point.size(); ++t) {
    for (Eigen::Index i = 0; i < n; ++i) col[i] = residuals(i, t);
    std::sort(col.begin(), col.end());
    for (Eigen::Index q = 0; q < levels.size(); ++q) {
      const double h = (static_cast<double>(n) - 1.0) * levels(q);
      const auto lo = static_cast<std::size_t>(std::floor(h));
      const std::size_t hi = std::min(lo + 1, col.size() - 1);
      const double r = col[lo] + (h - static_cast<double>(lo)) * (col[hi] - col[lo]);
      out(q, t) = point(t) + r;
      if (q > 0) out(q, t) = std::max(out(q, t), out(q - 1, t));
    }
  }
  return out;
}

void attach_quantiles(Forecast& forecast, const Matrix& residuals, const Vector& levels) {
  forecast.quantiles = quantile_forecast(forecast.net, residuals, levels);
  forecast.levels = levels;
}

Vector default_quantile_levels() {
  Vector v(21);
  v(0) = 0.01;
  for (int i = 1; i <= 19; ++i) v(i) = 0.05 * i;
  v(20) = 0.99;
  return v;
}

std::string quantile_column(double level) {
  const double pct = level * 100.0;
  const double rounded = std::round(pct);
  if (std::abs(pct - rounded) < 1e-9) {
    const auto whole = static_cast<long>(rounded);
    return whole < 10 ? "q_0" + std::to_string(whole) : "q_" + std::to_string(whole);
  }
  return "q_" + format_double(pct);
}

void write_forecast_csv(std::ostream& out, const std::vector<Forecast>& days,
                        const std::vector<int>& day_labels) {
  if (days.size() != day_labels.size()) throw InvalidInput("forecast csv: one label per day");
  const Vector levels = days.empty() ? Vector() : days.front().levels;
  out << "day,hour,net,baseload_net,flexible,shift_up,shift_down,shed_kept";
  for (Eigen::Index q = 0; q < levels.size(); ++q) out << ',' << quantile_column(levels(q));
  out << '\n';
  for (std::size_t d = 0; d < days.size(); ++d) {
    const Forecast& f = days[d];
    if (f.levels.size() != levels.size()) throw InvalidInput("forecast csv: mixed quantile levels");
    for (Eigen::Index t = 0; t < f.periods(); ++t) {
      out << day_labels[d] << ',' << t;
      for (const Vector* v : {&f.net, &f.baseload_net, &f.flexible, &f.shift_up, &f.shift_down,
                              &f.shed_kept}) {
        out << ',' << format_double((*v)(t));
      }
      for (Eigen::Index q = 0; q < levels.size(); ++q) out << ',' << format_double(f.quantiles(q, t));
      out << '\n';
    }
  }
}

}  // namespace flexio
