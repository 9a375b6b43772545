#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "flexio/kernel.hpp"

namespace flexio {
namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

std::vector<Matrix> random_days(std::mt19937_64& rng, int days, int periods, int features) {
  std::vector<Matrix> out;
  for (int s = 0; s < days; ++s) out.push_back(random_matrix(rng, periods, features));
  return out;
}

TEST(GramRow, SelfSimilarityIsOne) {
  Matrix anchors(3, 2);
  anchors << 0, 0, 1, 0, 3, 4;
  const Vector row = gram_row(anchors.row(2).transpose(), anchors, 0.7);
  EXPECT_EQ(row(2), 1.0);
  EXPECT_LT(row(0), 1.0);
  EXPECT_GT(row(0), 0.0);
}

TEST(GramRow, UnitDistance) {
  Matrix anchors(1, 2);
  anchors << 1.0, 0.0;
  Vector q(2);
  q << 0.0, 0.0;
  EXPECT_NEAR(gram_row(q, anchors, 1.0)(0), 0.36787944117144233, 1e-15);
  anchors << 0.6, 0.8;
  EXPECT_NEAR(gram_row(q, anchors, 1.0)(0), std::exp(-1.0), 1e-15);
}

TEST(GramRow, NarrowBandwidthIsLocal) {
  std::mt19937_64 rng(4);
  const Matrix anchors = random_matrix(rng, 50, 3);
  const Vector row = gram_row(anchors.row(10).transpose(), anchors, 1e6);
  for (int i = 0; i < 50; ++i) {
    if (i == 10) {
      EXPECT_EQ(row(i), 1.0);
    } else {
      EXPECT_LT(row(i), 1e-10);
    }
  }
}

TEST(GramRow, WideBandwidthCollapsesToOne) {
  std::mt19937_64 rng(5);
  const Matrix anchors = random_matrix(rng, 40, 3);
  const Vector row = gram_row(Vector::Zero(3), anchors, 1e-12);
  EXPECT_LT((row.array() - 1.0).abs().maxCoeff(), 1e-10);
}

TEST(GramRow, MatchesDirectFormula) {
  std::mt19937_64 rng(6);
  const Matrix anchors = random_matrix(rng, 37, 3);
  const Vector q = random_matrix(rng, 3, 1);
  const Vector row = gram_row(q, anchors, 0.8);
  for (int i = 0; i < 37; ++i) {
    const double expected = std::exp(-0.8 * (anchors.row(i).transpose() - q).norm());
    EXPECT_NEAR(row(i), expected, 1e-15 + 1e-14 * expected);
  }
}

TEST(GramRow, RejectsBadInput) {
  Matrix anchors = Matrix::Zero(2, 2);
  EXPECT_THROW(gram_row(Vector::Zero(3), anchors, 1.0), InvalidInput);
  EXPECT_THROW(gram_row(Vector::Zero(2), anchors, 0.0), InvalidInput);
  Vector q = Vector::Zero(2);
  q(0) = std::nan("");
  EXPECT_THROW(gram_row(q, anchors, 1.0), InvalidInput);
}

TEST(Scaler, StandardizeAndMinMax) {
  std::mt19937_64 rng(7);
  Matrix rows = random_matrix(rng, 100, 2) * 3.0;
  rows.col(1).array() += 5.0;
  const auto st = FeatureScaler::fit(rows, FeatureScaling::kStandardize);
  const Matrix z = st.apply(rows);
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(z.col(j).mean(), 0.0, 1e-12);
    EXPECT_NEAR((z.col(j).array() - z.col(j).mean()).square().mean(), 1.0, 1e-12);
  }
  const auto mm = FeatureScaler::fit(rows, FeatureScaling::kMinMaxHalf);
  const Matrix h = mm.apply(rows);
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(h.col(j).minCoeff(), -0.5, 1e-12);
    EXPECT_NEAR(h.col(j).maxCoeff(), 0.5, 1e-12);
  }
  Matrix constant = Matrix::Constant(4, 1, 2.0);
  EXPECT_EQ(FeatureScaler::fit(constant, FeatureScaling::kStandardize).apply(constant).norm(), 0.0);
}

TEST(EnvelopeRule, ZeroAndConstantRules) {
  std::mt19937_64 rng(8);
  auto m = KernelEnvelopeModel::create(random_days(rng, 3, 4, 2), {1.0, 1.0, 1.0});
  for (int s = 0; s < 3; ++s) {
    for (int t = 0; t < 4; ++t) {
      EXPECT_EQ(evaluate(envelope_train_expr(m, Family::kShiftUp, s, t), m, Family::kShiftUp), 0.0);
    }
  }
  m.beta0[static_cast<int>(Family::kShed)] = 1.0;
  const auto e = envelope_train_expr(m, Family::kShed, 2, 3);
  EXPECT_EQ(evaluate(e, m, Family::kShed), 1.0);
  FlexBounds k{Vector::Constant(4, 5.0), Vector::Constant(4, 5.0), Vector::Constant(4, 0.25)};
  const auto fc = envelope_forecast(m, random_matrix(rng, 4, 2), k);
  EXPECT_EQ(fc.sd, Vector::Constant(4, 0.25));
  EXPECT_EQ(fc.sf_plus, Vector::Zero(4));
}

TEST(EnvelopeRule, SingleCoefficientIsLocal) {
  std::mt19937_64 rng(9);
  auto m = KernelEnvelopeModel::create(random_days(rng, 2, 5, 2), {1e4, 1e4, 1e4});
  m.beta0[0] = 0.3;
  m.coeff(Family::kShiftUp, 1, 2) = 2.0;
  for (int s = 0; s < 2; ++s) {
    for (int t = 0; t < 5; ++t) {
      const double v = evaluate(envelope_train_expr(m, Family::kShiftUp, s, t), m, Family::kShiftUp);
      EXPECT_NEAR(v, (s == 1 && t == 2) ? 2.3 : 0.3, 1e-10);
    }
  }
}

TEST(EnvelopeForecast, ClipsAndFallsBackToIntercept) {
  std::mt19937_64 rng(10);
  auto m = KernelEnvelopeModel::create(random_days(rng, 2, 3, 1), {1.0, 1.0, 1.0});
  m.beta0 = {0.5, -0.2, 0.1};
  m.coeff(Family::kShed, 0, 0) = 1.0;
  const Matrix near = m.anchors.topRows(3).array() * m.scaler.scale(0) + m.scaler.offset(0);
  const auto fc = envelope_forecast(m, near);
  EXPECT_EQ(fc.sf_plus, Vector::Constant(3, 0.5));
  EXPECT_EQ(fc.sf_minus, Vector::Zero(3));
  Matrix far = Matrix::Constant(3, 1, 1e5);
  const auto ff = envelope_forecast(m, far);
  EXPECT_NEAR(ff.sd(0), 0.1, 1e-12);
  EXPECT_EQ(ff.sf_minus, Vector::Zero(3));
  EXPECT_THROW(envelope_forecast(m, Matrix::Zero(3, 2)), InvalidInput);
}

TEST(EnvelopeForecast, NeverNegative) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    auto m = KernelEnvelopeModel::create(random_days(rng, 3, 4, 2), {0.5, 2.0, 5.0});
    for (auto& b : m.beta) b = random_matrix(rng, 3, 4);
    m.beta0 = {-0.5, 0.0, 0.5};
    const auto fc = envelope_forecast(m, random_matrix(rng, 4, 2));
    EXPECT_GE(fc.sf_plus.minCoeff(), 0.0);
    EXPECT_GE(fc.sf_minus.minCoeff(), 0.0);
    EXPECT_GE(fc.sd.minCoeff(), 0.0);
  }
}

TEST(Interpolation, ReproducesTargetsAtAnchors) {
  std::mt19937_64 rng(12);
  auto m = KernelEnvelopeModel::create(random_days(rng, 4, 6, 3), {0.5, 0.5, 3.0});
  std::array<Matrix, 3> targets{random_matrix(rng, 4, 6).cwiseAbs(),
                                random_matrix(rng, 4, 6).cwiseAbs(),
                                random_matrix(rng, 4, 6).cwiseAbs()};
  const auto report = fit_coefficients(m, targets);
  EXPECT_LE(report.max_residual, 1e-9);
  for (Family f : kFamilies) {
    const int fi = static_cast<int>(f);
    EXPECT_NEAR(m.beta[fi].sum(), 0.0, 1e-9);
    for (int s = 0; s < 4; ++s) {
      for (int t = 0; t < 6; ++t) {
        EXPECT_NEAR(evaluate(envelope_train_expr(m, f, s, t), m, f), targets[fi](s, t), 1e-9);
      }
    }
  }
}

TEST(Interpolation, ConstantTargetsGiveConstantRule) {
  std::mt19937_64 rng(13);
  auto m = KernelEnvelopeModel::create(random_days(rng, 3, 5, 2), {1.0, 1.0, 1.0});
  const Matrix c = Matrix::Constant(3, 5, 0.7);
  fit_coefficients(m, {c, c, c});
  EXPECT_NEAR(m.beta0[0], 0.7, 1e-10);
  EXPECT_LE(m.beta[0].cwiseAbs().maxCoeff(), 1e-10);
  const auto fc = envelope_forecast(m, random_matrix(rng, 5, 2));
  EXPECT_LE((fc.sd.array() - 0.7).abs().maxCoeff(), 1e-10);
}

TEST(Interpolation, RepeatedAnchorsUseLeastSquares) {
  std::vector<Matrix> days{Matrix::Zero(2, 1), Matrix::Zero(2, 1)};
  days[0](1, 0) = 1.0;
  days[1](1, 0) = 1.0;
  auto m = KernelEnvelopeModel::create(days, {1.0, 1.0, 1.0}, FeatureScaling::kNone);
  Matrix t(2, 2);
  t << 1.0, 2.0, 3.0, 2.0;
  const auto report = fit_coefficients(m, {t, t, t});
  // Cells (0,0) and (1,0) share an anchor but disagree: best fit splits the difference.
  EXPECT_NEAR(report.max_residual, 1.0, 1e-8);
  EXPECT_TRUE(m.beta[0].allFinite());
}

}  // namespace
}  // namespace flexio
