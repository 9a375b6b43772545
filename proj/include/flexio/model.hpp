#pragma once

#include <optional>

#include "flexio/types.hpp"

namespace flexio {

/// Per-hour comfort (quadratic) part of the consumer utility, Q_t.
Vector comfort_terms(const FlexDecision& theta, const ComfortCosts& costs);

/// Per-hour financial exchange with the system operator, L_t.
Vector exchange_terms(const FlexDecision& theta, const PriceSignal& prices,
                      const DemandAttributes& attrs, const Vector& gen);

/// Consumer utility sum_t Q_t + L_t. The binaries in `theta` are not consulted.
double consumer_utility(const FlexDecision& theta, const PriceSignal& prices,
                        const ComfortCosts& costs, const DemandAttributes& attrs,
                        const Vector& gen);

/// Normalized forgetting weights (s/S)^alpha / sum_s' (s'/S)^alpha, s = 1..S.
Vector compute_weights(double alpha, int days);

enum class ShedPriceRule {
  // Day-constant shedding price equal to the mean shift-up incentive.
  kMeanShiftUpIncentive,
  kZero,
};

/// Builds the price signal of a flat retail tariff against a time-of-use schedule.
PriceSignal build_tou_prices(double flat, const Vector& tou,
                             ShedPriceRule shed_rule = ShedPriceRule::kMeanShiftUpIncentive);

/// Comfort costs |flat - tou| in the hours where the matching incentive is zero.
/// The shedding cost defaults to the mean of the nonzero shifting costs of the day;
/// `sd_override` replaces it with a constant.
ComfortCosts build_comfort_costs(const PriceSignal& prices, double flat, const Vector& tou,
                                 std::optional<double> sd_override = std::nullopt);

/// Time-of-use schedule with `peak` inside the half-open hour windows and `offpeak`
/// elsewhere. Windows are given as (start_hour, end_hour).
Vector tou_schedule(int periods, double peak, double offpeak,
                    const std::vector<std::pair<int, int>>& peak_windows);

}  // namespace flexio
