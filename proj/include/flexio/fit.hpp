#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "flexio/fop.hpp"
#include "flexio/kernel.hpp"
#include "flexio/types.hpp"

namespace flexio {

enum class SolverMode {
  // Global branch-and-bound over all days jointly.
  kExact,
  // Block coordinate descent between the baseload and the per-day decisions.
  kAlternating,
};

const char* to_string(SolverMode mode);
SolverMode parse_solver_mode(const std::string& text);

struct FitConfig {
  Hyperparams hyper;
  SolverMode solver_mode = SolverMode::kExact;
  int max_iters = 50;
  // Absolute-plus-relative objective tolerance for pruning and for stopping.
  double tol_obj = 1e-9;
  double tol_kkt = 1e-8;
  std::uint64_t seed = 0;
  FeatureScaling scaling = FeatureScaling::kStandardize;
  // Added to the Gram diagonal when fitting the kernel coefficients.
  double ridge = 0.0;
  long max_nodes = 2'000'000;
  // Per-day search budget inside each alternating step. Hitting it leaves the
  // best day found and clears `converged`.
  long day_nodes = 100;
  int threads = 0;

  void validate(int periods) const;
};

struct FitResult {
  Vector d_bl;
  KernelEnvelopeModel envelope_model;
  std::vector<FopSolution> per_day;
  // Baseload plus the envelopes recovered for each training day.
  std::vector<DemandAttributes> attributes;
  Vector weights;
  Hyperparams hyper;
  SolverMode solver_mode = SolverMode::kExact;
  double training_loss = 0.0;
  double kkt_max_residual = 0.0;
  // Max deviation of the kernel rules from the recovered envelopes at the anchors.
  double rule_residual = 0.0;
  int iterations = 0;
  long nodes = 0;
  // False when an iteration or node limit stopped the solver early.
  bool converged = true;
};

/// Estimates baseload, envelopes and per-day decisions from net demand alone.
///
/// Minimizes sum_s w_s ||d_bl + d_sf_s + d_sd_s - g_s - d_s||^2 over baseload,
/// envelopes in [0, K] and decisions that satisfy the consumer's KKT conditions
/// for their direction binaries. The envelopes are then turned into kernel rules.
FitResult fit(const std::vector<DaySample>& train, const std::vector<FlexBounds>& bounds,
              const std::vector<PriceSignal>& prices, const std::vector<ComfortCosts>& costs,
              const FitConfig& config);

/// Rebuilds the kernel rules from the stored envelopes with new bandwidths.
/// The baseload and decisions do not depend on the bandwidths.
void refit_envelope_rules(FitResult& result, const std::vector<DaySample>& train,
                          const std::array<double, 3>& gammas,
                          FeatureScaling scaling = FeatureScaling::kStandardize, double ridge = 0.0);

/// sum_s w_s ||d_bl + d_sf_s + d_sd_s - g_s - d_s||_2^2 for the stored decisions.
double reconstruction_loss(const FitResult& result, const std::vector<DaySample>& train,
                           const Vector& weights);

struct DayCheck {
  double kkt_residual = 0.0;
  bool in_feasible_set = false;
  bool envelopes_in_bounds = false;
  // Optimal consumer utility with the recovered envelopes minus the utility of
  // the stored decision; zero when the decision is also optimal over the binaries.
  double fop_gap = 0.0;
};

struct FitReport {
  std::vector<DayCheck> days;
  double max_kkt_residual = 0.0;
  double max_fop_gap = 0.0;
  bool all_feasible = true;
  bool all_in_bounds = true;
  bool passed = false;
};

FitReport verify_fit(const FitResult& result, const std::vector<PriceSignal>& prices,
                     const std::vector<ComfortCosts>& costs,
                     const std::vector<FlexBounds>& bounds, int t_max, double tol_kkt = 1e-8);

/// Per-hour weighted median of the columns of `rows` (days x periods).
Vector weighted_median(const Matrix& rows, const Vector& weights);

}  // namespace flexio
