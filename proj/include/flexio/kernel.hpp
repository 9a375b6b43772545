#pragma once

#include <array>
#include <optional>

#include "flexio/types.hpp"

namespace flexio {

enum class Family : int { kShiftUp = 0, kShiftDown = 1, kShed = 2 };
inline constexpr std::array<Family, 3> kFamilies{Family::kShiftUp, Family::kShiftDown,
                                                 Family::kShed};
const char* family_name(Family f);

enum class FeatureScaling {
  // Zero mean, unit variance per feature.
  kStandardize,
  // Affine map of the training range onto [-0.5, 0.5].
  kMinMaxHalf,
  kNone,
};

/// Per-feature affine transform x -> (x - offset) / scale, fitted on training rows.
struct FeatureScaler {
  FeatureScaling kind = FeatureScaling::kStandardize;
  Vector offset;
  Vector scale;

  static FeatureScaler fit(const Matrix& rows, FeatureScaling kind);
  Matrix apply(const Matrix& rows) const;
};

/// exp(-gamma * ||query - anchor_i||_2) for every anchor row.
Vector gram_row(const Vector& query, const Matrix& anchors, double gamma);

/// Affine function beta0 + sum_i coeffs_i beta_i of one family's coefficients.
struct AffineExpr {
  double beta0_coeff = 1.0;
  Vector coeffs;
};

/// Kernel decision rules for the three envelopes
///
///   env_f(xi) = beta0_f + sum_{s,t} beta_f[s,t] exp(-gamma_f ||xi - xi_{s,t}||)
///
/// with one anchor per training cell (s, t).
struct KernelEnvelopeModel {
  int days = 0;
  int periods = 0;
  std::array<double, 3> beta0{0.0, 0.0, 0.0};
  std::array<Matrix, 3> beta;  // days x periods
  std::array<double, 3> gamma{1.0, 1.0, 1.0};
  Matrix anchors;  // (days * periods) x F, scaled; row s * periods + t
  FeatureScaler scaler;

  /// Zero coefficients over the given training features (one T x F block per day).
  static KernelEnvelopeModel create(const std::vector<Matrix>& day_features,
                                    const std::array<double, 3>& gammas,
                                    FeatureScaling scaling = FeatureScaling::kStandardize);

  int features() const { return static_cast<int>(anchors.cols()); }
  int cells() const { return days * periods; }
  void validate() const;

  double& coeff(Family f, int s, int t) { return beta[static_cast<int>(f)](s, t); }
  double coeff(Family f, int s, int t) const { return beta[static_cast<int>(f)](s, t); }
};

/// The training-time rule at cell (s, t) as an affine function of family f's coefficients.
AffineExpr envelope_train_expr(const KernelEnvelopeModel& model, Family f, int s, int t);

/// Value of an affine expression under the model's current coefficients.
double evaluate(const AffineExpr& expr, const KernelEnvelopeModel& model, Family f);

/// Raw rule values (no clipping) for one day of unscaled features.
Vector envelope_rule(const KernelEnvelopeModel& model, Family f, const Matrix& features_day);

struct EnvelopeForecast {
  Vector sf_plus;
  Vector sf_minus;
  Vector sd;
};

/// Envelopes for a new day: rule values clipped below at 0 and, when given, above by `bounds`.
EnvelopeForecast envelope_forecast(const KernelEnvelopeModel& model, const Matrix& features_day,
                                   const std::optional<FlexBounds>& bounds = std::nullopt);

struct InterpolationReport {
  // Max-norm of rule(anchor) - target over all families and cells.
  double max_residual = 0.0;
};

/// Sets the coefficients so that the rule reproduces `targets` (days x periods per family)
/// at every anchor, with sum_i beta_i = 0 fixing the intercept. `ridge` > 0 adds
/// ridge * I to the Gram matrix. Singular Gram matrices (repeated anchors) fall back
/// to the least-squares solution.
InterpolationReport fit_coefficients(KernelEnvelopeModel& model,
                                     const std::array<Matrix, 3>& targets, double ridge = 0.0);

}  // namespace flexio
