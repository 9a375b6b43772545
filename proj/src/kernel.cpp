#include "flexio/kernel.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "flexio/simd/kernels.hpp"

namespace flexio {
namespace {

void check_features(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw InvalidInput(std::string(what) + ": non-finite feature");
}

Matrix gram_matrix(const Matrix& anchors, double gamma) {
  const auto n = anchors.rows();
  Matrix g(n, n);
  const auto& k = simd::active_kernels();
  Vector query(anchors.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    query = anchors.row(i).transpose();
    k.laplace_row(query.data(), anchors.data(), static_cast<std::size_t>(n),
                  static_cast<std::size_t>(anchors.cols()), gamma, g.col(i).data());
  }
  return g;
}

}  // namespace

const char* family_name(Family f) {
  switch (f) {
    case Family::kShiftUp: return "sf_plus";
    case Family::kShiftDown: return "sf_minus";
    case Family::kShed: return "sd";
  }
  return "?";
}

FeatureScaler FeatureScaler::fit(const Matrix& rows, FeatureScaling kind) {
  check_features(rows, "scaler");
  FeatureScaler s;
  s.kind = kind;
  const auto f = rows.cols();
  s.offset = Vector::Zero(f);
  s.scale = Vector::Ones(f);
  if (rows.rows() == 0) return s;
  for (Eigen::Index j = 0; j < f; ++j) {
    const auto col = rows.col(j);
    if (kind == FeatureScaling::kStandardize) {
      const double mean = col.mean();
      const double var = (col.array() - mean).square().mean();
      s.offset(j) = mean;
      s.scale(j) = var > 0.0 ? std::sqrt(var) : 1.0;
    } else if (kind == FeatureScaling::kMinMaxHalf) {
      const double lo = col.minCoeff();
      const double hi = col.maxCoeff();
      s.offset(j) = 0.5 * (lo + hi);
      s.scale(j) = hi > lo ? hi - lo : 1.0;
    }
  }
  return s;
}

Matrix FeatureScaler::apply(const Matrix& rows) const {
  if (rows.cols() != offset.size()) throw InvalidInput("scaler: feature count mismatch");
  return ((rows.rowwise() - offset.transpose()).array().rowwise() / scale.transpose().array())
      .matrix();
}

Vector gram_row(const Vector& query, const Matrix& anchors, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidInput("kernel: gamma must be > 0");
  if (query.size() != anchors.cols()) throw InvalidInput("kernel: feature dimension mismatch");
  check_features(query, "kernel query");
  check_features(anchors, "kernel anchors");
  Vector out(anchors.rows());
  simd::active_kernels().laplace_row(query.data(), anchors.data(),
                                     static_cast<std::size_t>(anchors.rows()),
                                     static_cast<std::size_t>(anchors.cols()), gamma, out.data());
  return out;
}

KernelEnvelopeModel KernelEnvelopeModel::create(const std::vector<Matrix>& day_features,
                                                const std::array<double, 3>& gammas,
                                                FeatureScaling scaling) {
  if (day_features.empty()) throw InvalidInput("kernel: no training days");
  const auto t = day_features.front().rows();
  const auto f = day_features.front().cols();
  Matrix rows(static_cast<Eigen::Index>(day_features.size()) * t, f);
  for (std::size_t s = 0; s < day_features.size(); ++s) {
    if (day_features[s].rows() != t || day_features[s].cols() != f) {
      throw InvalidInput("kernel: ragged training features at day " + std::to_string(s));
    }
    rows.middleRows(static_cast<Eigen::Index>(s) * t, t) = day_features[s];
  }
  KernelEnvelopeModel m;
  m.days = static_cast<int>(day_features.size());
  m.periods = static_cast<int>(t);
  m.gamma = gammas;
  m.scaler = FeatureScaler::fit(rows, scaling);
  m.anchors = m.scaler.apply(rows);
  for (auto& b : m.beta) b = Matrix::Zero(m.days, m.periods);
  m.validate();
  return m;
}

void KernelEnvelopeModel::validate() const {
  for (double g : gamma) {
    if (!(g > 0.0) || !std::isfinite(g)) throw InvalidInput("kernel: gamma must be > 0");
  }
  if (anchors.rows() != static_cast<Eigen::Index>(days) * periods) {
    throw InvalidInput("kernel: anchor count does not match days x periods");
  }
  for (const auto& b : beta) {
    if (b.rows() != days || b.cols() != periods) {
      throw InvalidInput("kernel: coefficient shape does not match anchors");
    }
  }
  if (scaler.offset.size() != anchors.cols() || scaler.scale.size() != anchors.cols()) {
    throw InvalidInput("kernel: scaler does not match feature count");
  }
}

AffineExpr envelope_train_expr(const KernelEnvelopeModel& model, Family f, int s, int t) {
  if (s < 0 || s >= model.days || t < 0 || t >= model.periods) {
    throw InvalidInput("kernel: cell index out of range");
  }
  AffineExpr e;
  e.coeffs = gram_row(model.anchors.row(static_cast<Eigen::Index>(s) * model.periods + t).transpose(),
                      model.anchors, model.gamma[static_cast<int>(f)]);
  return e;
}

double evaluate(const AffineExpr& expr, const KernelEnvelopeModel& model, Family f) {
  const auto& b = model.beta[static_cast<int>(f)];
  if (expr.coeffs.size() != b.size()) throw InvalidInput("kernel: expression size mismatch");
  // beta is days x periods column-major; anchors are ordered s * periods + t.
  const Matrix bt = b.transpose();
  return expr.beta0_coeff * model.beta0[static_cast<int>(f)] +
         expr.coeffs.dot(Eigen::Map<const Vector>(bt.data(), bt.size()));
}

Vector envelope_rule(const KernelEnvelopeModel& model, Family f, const Matrix& features_day) {
  if (features_day.cols() != model.features()) {
    throw InvalidInput("kernel: feature dimension mismatch");
  }
  check_features(features_day, "kernel forecast features");
  const Matrix scaled = model.scaler.apply(features_day);
  const int fi = static_cast<int>(f);
  const Matrix bt = model.beta[fi].transpose();
  const Eigen::Map<const Vector> flat(bt.data(), bt.size());
  Vector out(features_day.rows());
  for (Eigen::Index t = 0; t < features_day.rows(); ++t) {
    out(t) = model.beta0[fi] + gram_row(scaled.row(t).transpose(), model.anchors, model.gamma[fi]).dot(flat);
  }
  return out;
}

EnvelopeForecast envelope_forecast(const KernelEnvelopeModel& model, const Matrix& features_day,
                                   const std::optional<FlexBounds>& bounds) {
  EnvelopeForecast out;
  out.sf_plus = envelope_rule(model, Family::kShiftUp, features_day).cwiseMax(0.0);
  out.sf_minus = envelope_rule(model, Family::kShiftDown, features_day).cwiseMax(0.0);
  out.sd = envelope_rule(model, Family::kShed, features_day).cwiseMax(0.0);
  if (bounds) {
    bounds->validate(features_day.rows());
    out.sf_plus = out.sf_plus.cwiseMin(bounds->sf_plus);
    out.sf_minus = out.sf_minus.cwiseMin(bounds->sf_minus);
    out.sd = out.sd.cwiseMin(bounds->sd);
  }
  return out;
}

InterpolationReport fit_coefficients(KernelEnvelopeModel& model,
                                     const std::array<Matrix, 3>& targets, double ridge) {
  model.validate();
  if (!(ridge >= 0.0)) throw InvalidInput("kernel: ridge must be >= 0");
  const Eigen::Index n = model.cells();
  InterpolationReport report;
  std::array<bool, 3> done{false, false, false};
  for (int fi = 0; fi < 3; ++fi) {
    if (done[fi]) continue;
    std::vector<int> group;
    for (int fj = fi; fj < 3; ++fj) {
      if (!done[fj] && model.gamma[fj] == model.gamma[fi]) group.push_back(fj);
    }
    const Matrix g = gram_matrix(model.anchors, model.gamma[fi]);
    Matrix sys = Matrix::Zero(n + 1, n + 1);
    sys.topLeftCorner(n, n) = g;
    sys.topLeftCorner(n, n).diagonal().array() += ridge;
    sys.col(n).head(n).setOnes();
    sys.row(n).head(n).setOnes();
    Matrix rhs = Matrix::Zero(n + 1, static_cast<Eigen::Index>(group.size()));
    for (std::size_t k = 0; k < group.size(); ++k) {
      const auto& tg = targets[group[k]];
      if (tg.rows() != model.days || tg.cols() != model.periods) {
        throw InvalidInput("kernel: target shape does not match anchors");
      }
      const Matrix tt = tg.transpose();
      rhs.col(static_cast<Eigen::Index>(k)).head(n) = Eigen::Map<const Vector>(tt.data(), n);
    }
    Matrix sol = sys.partialPivLu().solve(rhs);
    const double scale = 1.0 + rhs.cwiseAbs().maxCoeff();
    if (!sol.allFinite() || (sys * sol - rhs).cwiseAbs().maxCoeff() > 1e-9 * scale) {
      sol = sys.completeOrthogonalDecomposition().solve(rhs);
    }
    for (std::size_t k = 0; k < group.size(); ++k) {
      const int fj = group[k];
      const Vector col = sol.col(static_cast<Eigen::Index>(k));
      model.beta0[fj] = col(n);
      Matrix bt = Eigen::Map<const Matrix>(col.data(), model.periods, model.days);
      model.beta[fj] = bt.transpose();
      const Vector fitted = g * col.head(n) + Vector::Constant(n, col(n));
      report.max_residual = std::max(
          report.max_residual, (fitted - rhs.col(static_cast<Eigen::Index>(k)).head(n)).cwiseAbs().maxCoeff());
      done[fj] = true;
    }
  }
  return report;
}

}  // namespace flexio
