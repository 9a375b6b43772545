#pragma once

#include "flexio/types.hpp"

namespace flexio {

/// Dual certificate of the consumer's forward problem.
///
/// kappa prices the energy-neutrality row; mu_* are the duals of the envelope
/// upper bounds and nu_* those of the nonnegativity bounds (plus, minus, shed).
struct KktCertificate {
  double kappa = 0.0;
  Vector mu_plus, mu_minus, mu_zero;
  Vector nu_plus, nu_minus, nu_zero;
};

struct FopSolution {
  FlexDecision theta;
  KktCertificate certificate;
  double utility = 0.0;
  Vector d_sf;  // d_sf_plus - d_sf_minus
  Vector d_sd;  // env_sd - d_sd_minus
  int nodes = 0;
};

struct ShiftSolution {
  Vector d_sf_plus;
  Vector d_sf_minus;
  double kappa = 0.0;
};

struct FopOptions {
  // Absolute/relative optimality gap for pruning.
  double gap_tol = 1e-10;
  int max_nodes = 1'000'000;
};

/// Optimal shed amounts, hour by hour: clip((p_sd + p) / 2c_sd, 0, env_sd).
/// With c_sd = 0 the response is bang-bang and only activates on a strictly
/// positive marginal gain.
Vector solve_shed(const PriceSignal& prices, const ComfortCosts& costs, const Vector& env_sd);

/// Exact maximizer of the shifting subproblem for fixed direction binaries.
///
/// The neutrality multiplier is located on the breakpoints of the monotone
/// gap function sum d_sf_plus(kappa) - sum d_sf_minus(kappa), then solved in
/// closed form on the bracketing segment. When the optimal multiplier is not
/// unique the midpoint of the optimal interval is reported (0 when the
/// interval is unbounded on both sides). Hours with zero comfort cost sitting
/// exactly at indifference are filled in proportion to their envelopes, using
/// the least total shifting that restores neutrality.
ShiftSolution solve_shift_given_binaries(const PriceSignal& prices, const ComfortCosts& costs,
                                         const Vector& env_plus, const Vector& env_minus,
                                         const BinaryVector& delta_plus,
                                         const BinaryVector& delta_minus);

/// Globally optimal consumer decision over the full feasibility set, including
/// the direction binaries and the shifted-hours budget `t_max`.
///
/// Branch-and-bound over the per-hour direction (up, down, idle). The bound at
/// a node is the Lagrangian dual of the neutrality row, minimized over kappa;
/// each node also evaluates the patterns selected by the dual as incumbents.
/// Ties resolve toward the solution with the least flexibility.
FopSolution solve_fop(const PriceSignal& prices, const ComfortCosts& costs,
                      const DemandAttributes& attrs, int t_max, const Vector& gen,
                      const FopOptions& options = {});

/// Builds the dual certificate implied by the stationarity rows at (theta, kappa).
KktCertificate certificate_for(const FlexDecision& theta, double kappa,
                               const PriceSignal& prices, const ComfortCosts& costs);

/// Max-norm of the stationarity, complementarity, dual-feasibility and
/// primal-feasibility residuals of `solution`. Zero at a KKT point.
double kkt_residual(const FopSolution& solution, const PriceSignal& prices,
                    const ComfortCosts& costs, const DemandAttributes& attrs);

/// Assembles a FopSolution (certificate, utility, d_sf, d_sd) around a decision.
FopSolution make_fop_solution(FlexDecision theta, double kappa, const PriceSignal& prices,
                              const ComfortCosts& costs, const DemandAttributes& attrs,
                              const Vector& gen);

}  // namespace flexio
