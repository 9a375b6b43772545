#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flexio/dataset.hpp"
#include "flexio/kernel.hpp"
#include "flexio/types.hpp"

namespace flexio {

enum class EnvelopeRuleKind { kConstant, kKernel };

/// Ground-truth consumer for generated data. Every day is produced by solving
/// the consumer program exactly, then adding Gaussian noise.
struct SyntheticSpec {
  int periods = 24;
  int days = 40;
  // Empty: a two-peak residential profile scaled by base_load.
  Vector d_bl;
  double base_load = 1.0;

  EnvelopeRuleKind rule = EnvelopeRuleKind::kConstant;
  // Constant envelope levels (up, down, shed), or beta0 of the kernel rule.
  std::array<double, 3> envelope{0.3, 0.3, 0.1};
  std::array<double, 3> gamma{1.0, 1.0, 1.0};
  // Standard deviation of the kernel rule coefficients.
  double kernel_scale = 0.1;
  // Days whose features anchor the kernel rule, counted from the first day;
  // 0 means every day. The coefficients sum to zero, so beta0 is the level
  // far from the anchors.
  int anchor_days = 0;
  // Replaces the random kernel rule when set. Its features must match the
  // generated ones (temperature, hour_sin, hour_cos).
  std::optional<KernelEnvelopeModel> kernel_rule;

  double flat_price = 25.0;
  double peak_price = 35.0;
  double offpeak_price = 20.0;
  std::vector<std::pair<int, int>> peak_windows{{17, 21}};
  // Relative day-to-day standard deviation of the whole TOU schedule.
  double tou_jitter = 0.2;
  ShedPriceRule shed_rule = ShedPriceRule::kMeanShiftUpIncentive;
  std::optional<double> shed_cost;

  double gen_peak = 1.0;
  double temp_mean = 15.0;
  double temp_day_sd = 4.0;
  double temp_amplitude = 5.0;

  double noise_sigma = 0.0;
  int t_max = 24;
  std::uint64_t seed = 1;
  std::string start_date = "2024-01-01";

  void validate() const;
  TariffSpec tariff() const;
};

struct SyntheticData {
  Dataset dataset;
  std::vector<DemandAttributes> truth;
  std::vector<FlexDecision> decisions;
  DaySignals signals;
  // Set for kernel rules.
  std::optional<KernelEnvelopeModel> rule;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Default baseload shape used when SyntheticSpec::d_bl is empty.
Vector default_baseload(int periods, double scale);

}  // namespace flexio
