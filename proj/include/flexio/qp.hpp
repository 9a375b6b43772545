#pragma once

#include <limits>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "flexio/types.hpp"

namespace flexio {

enum class QpStatus { kOptimal, kMaxIterations, kNumericalFailure };

struct QpOptions {
  // Scaled KKT residual at which iteration stops.
  double tolerance = 1e-13;
  // Best point is reported optimal when its residual is below this.
  double accept_tolerance = 1e-8;
  int max_iterations = 120;
};

struct QpResult {
  Vector x;
  double objective = 0.0;
  QpStatus status = QpStatus::kNumericalFailure;
  int iterations = 0;
  // Max of the scaled primal, dual and complementarity residuals at x.
  double residual = 0.0;
};

/// Sparse convex quadratic program
///
///   min  1/2 x'Px + q'x + c
///   s.t. A x = b,  G x <= h,  lb <= x <= ub
///
/// solved with a Mehrotra predictor-corrector interior point method on the
/// regularized quasi-definite KKT system.
class QpBuilder {
 public:
  using Term = std::pair<int, double>;
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  int add_variable(double lb = -kInf, double ub = kInf);
  int num_variables() const { return static_cast<int>(lb_.size()); }

  /// Adds weight * (sum_i a_i x_i + offset)^2 to the objective.
  void add_squared(const std::vector<Term>& terms, double offset, double weight);
  void add_linear(int var, double coeff);

  void add_equality(const std::vector<Term>& terms, double rhs);
  /// sum_i a_i x_i <= rhs
  void add_inequality(const std::vector<Term>& terms, double rhs);

  void set_bounds(int var, double lb, double ub);

  QpResult solve(const QpOptions& options = {}) const;

 private:
  std::vector<double> lb_, ub_, q_;
  double constant_ = 0.0;
  std::vector<Eigen::Triplet<double>> p_;
  std::vector<Eigen::Triplet<double>> a_, g_;
  std::vector<double> b_, h_;
};

}  // namespace flexio
