#include "flexio/model.hpp"

#include <cmath>

namespace flexio {
namespace {

void check_decision(const FlexDecision& theta, Eigen::Index n) {
  check_length(theta.d_sf_plus, n, "d_sf_plus");
  check_length(theta.d_sf_minus, n, "d_sf_minus");
  check_length(theta.d_sd_minus, n, "d_sd_minus");
}

}  // namespace

Vector comfort_terms(const FlexDecision& theta, const ComfortCosts& costs) {
  const auto n = costs.size();
  check_decision(theta, n);
  check_length(costs.sf_minus, n, "cost c_sf_minus");
  check_length(costs.sd, n, "cost c_sd");
  return -(costs.sf_plus.array() * theta.d_sf_plus.array().square() +
           costs.sf_minus.array() * theta.d_sf_minus.array().square() +
           costs.sd.array() * theta.d_sd_minus.array().square())
              .matrix();
}

Vector exchange_terms(const FlexDecision& theta, const PriceSignal& prices,
                      const DemandAttributes& attrs, const Vector& gen) {
  const auto n = prices.size();
  check_decision(theta, n);
  check_length(prices.sf_plus, n, "price p_sf_plus");
  check_length(prices.sf_minus, n, "price p_sf_minus");
  check_length(prices.sd, n, "price p_sd");
  check_length(attrs.d_bl, n, "baseload");
  check_length(attrs.env_sd, n, "envelope sd");
  check_length(gen, n, "generation");

  const auto consumption = attrs.d_bl.array() + theta.d_sf_plus.array() -
                           theta.d_sf_minus.array() + attrs.env_sd.array() -
                           theta.d_sd_minus.array() - gen.array();
  return (prices.sf_plus.array() * theta.d_sf_plus.array() +
          prices.sf_minus.array() * theta.d_sf_minus.array() +
          prices.sd.array() * theta.d_sd_minus.array() - prices.p.array() * consumption)
      .matrix();
}

double consumer_utility(const FlexDecision& theta, const PriceSignal& prices,
                        const ComfortCosts& costs, const DemandAttributes& attrs,
                        const Vector& gen) {
  check_length(costs.sf_plus, prices.size(), "cost c_sf_plus");
  return comfort_terms(theta, costs).sum() + exchange_terms(theta, prices, attrs, gen).sum();
}

Vector compute_weights(double alpha, int days) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidInput("weights: alpha must be >= 0");
  if (days < 1) throw InvalidInput("weights: S must be >= 1");
  Vector w(days);
  if (alpha == 0.0) {
    w.setConstant(1.0 / days);
    return w;
  }
  for (int s = 1; s <= days; ++s) {
    w(s - 1) = std::pow(static_cast<double>(s) / days, alpha);
  }
  // Entries can underflow for large alpha and S; the last weight is always 1.
  return w / w.sum();
}

PriceSignal build_tou_prices(double flat, const Vector& tou, ShedPriceRule shed_rule) {
  if (!(flat > 0.0) || !std::isfinite(flat)) throw InvalidInput("tariff: flat price must be > 0");
  if (tou.size() < 1) throw InvalidInput("tariff: empty TOU schedule");
  check_nonnegative(tou, "tariff: TOU schedule");

  const auto n = tou.size();
  PriceSignal out;
  out.p = Vector::Constant(n, flat);
  out.sf_plus = (flat - tou.array()).max(0.0).matrix();
  out.sf_minus = (tou.array() - flat).max(0.0).matrix();
  const double shed =
      shed_rule == ShedPriceRule::kMeanShiftUpIncentive ? out.sf_plus.sum() / n : 0.0;
  out.sd = Vector::Constant(n, shed);
  return out;
}

ComfortCosts build_comfort_costs(const PriceSignal& prices, double flat, const Vector& tou,
                                 std::optional<double> sd_override) {
  const auto n = prices.size();
  check_length(tou, n, "tariff: TOU schedule");
  ComfortCosts out;
  out.sf_plus.resize(n);
  out.sf_minus.resize(n);
  double nonzero_sum = 0.0;
  int nonzero_count = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double gap = std::abs(flat - tou(t));
    out.sf_plus(t) = prices.sf_plus(t) == 0.0 ? gap : 0.0;
    out.sf_minus(t) = prices.sf_minus(t) == 0.0 ? gap : 0.0;
    for (double c : {out.sf_plus(t), out.sf_minus(t)}) {
      if (c > 0.0) {
        nonzero_sum += c;
        ++nonzero_count;
      }
    }
  }
  double shed = nonzero_count > 0 ? nonzero_sum / nonzero_count : 0.0;
  if (sd_override) {
    if (!(*sd_override >= 0.0)) throw InvalidInput("tariff: shedding cost override < 0");
    shed = *sd_override;
  }
  out.sd = Vector::Constant(n, shed);
  return out;
}

Vector tou_schedule(int periods, double peak, double offpeak,
                    const std::vector<std::pair<int, int>>& peak_windows) {
  if (periods < 1) throw InvalidInput("tariff: T must be >= 1");
  Vector out = Vector::Constant(periods, offpeak);
  for (const auto& [start, end] : peak_windows) {
    if (start < 0 || end > periods || start > end) {
      throw InvalidInput("tariff: peak window outside [0, T]");
    }
    out.segment(start, end - start).setConstant(peak);
  }
  return out;
}

}  // namespace flexio
