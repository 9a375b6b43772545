#include "flexio/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCholesky>

namespace flexio {
namespace {

using SpMat = Eigen::SparseMatrix<double>;
constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

// Largest step in (0, 1] keeping v + alpha * dv >= 0.
double max_step(const Vector& v, const Vector& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  }
  return alpha;
}

// Quasi-definite augmented system
//
//   [ P + rI   A'     G'       ] [dx]   [r1]
//   [ A        -rI    0        ] [dy] = [r2]
//   [ G        0      -(W + rI)] [dz]   [r3]
//
// with W = diag(s / z). Keeping the inequality block avoids forming G'DG, whose
// entries spread over many orders of magnitude near the solution.
class KktSolver {
 public:
  KktSolver(const SpMat& P, const SpMat& A, const SpMat& G)
      : P_(P), A_(A), G_(G), n_(P.rows()), p_(A.rows()), m_(G.rows()) {
    std::vector<Eigen::Triplet<double>> trips;
    const Eigen::Index dim = n_ + p_ + m_;
    for (int k = 0; k < P.outerSize(); ++k) {
      for (SpMat::InnerIterator it(P, k); it; ++it) {
        if (it.row() >= it.col()) trips.emplace_back(it.row(), it.col(), it.value());
      }
    }
    for (int k = 0; k < A.outerSize(); ++k) {
      for (SpMat::InnerIterator it(A, k); it; ++it) trips.emplace_back(n_ + it.row(), it.col(), it.value());
    }
    for (int k = 0; k < G.outerSize(); ++k) {
      for (SpMat::InnerIterator it(G, k); it; ++it) {
        trips.emplace_back(n_ + p_ + it.row(), it.col(), it.value());
      }
    }
    for (Eigen::Index i = 0; i < dim; ++i) trips.emplace_back(i, i, 0.0);
    base_.resize(dim, dim);
    base_.setFromTriplets(trips.begin(), trips.end());
    base_.makeCompressed();
    diag_.resize(dim);
    for (Eigen::Index i = 0; i < dim; ++i) diag_(i) = base_.coeff(i, i);
    const double pmax = P.nonZeros() > 0 ? P.coeffs().cwiseAbs().maxCoeff() : 0.0;
    primal_reg_ = kReg * std::max(1.0, pmax);
    ldlt_.analyzePattern(base_);
  }

  bool factor(const Vector& w) {
    w_ = w;
    SpMat kkt = base_;
    for (Eigen::Index i = 0; i < n_; ++i) kkt.coeffRef(i, i) = diag_(i) + primal_reg_;
    for (Eigen::Index i = 0; i < p_; ++i) kkt.coeffRef(n_ + i, n_ + i) = -kReg;
    for (Eigen::Index i = 0; i < m_; ++i) kkt.coeffRef(n_ + p_ + i, n_ + p_ + i) = -(w(i) + kReg);
    ldlt_.factorize(kkt);
    return ldlt_.info() == Eigen::Success;
  }

  // Solves the unregularized system with iterative refinement.
  std::tuple<Vector, Vector, Vector> solve(const Vector& r1, const Vector& r2,
                                           const Vector& r3) const {
    Vector rhs(n_ + p_ + m_);
    rhs << r1, r2, r3;
    Vector sol = ldlt_.solve(rhs);
    for (int it = 0; it < 5; ++it) {
      const Vector res = rhs - apply(sol);
      if (inf_norm(res) <= 1e-15 * (1.0 + inf_norm(rhs))) break;
      sol += ldlt_.solve(res);
    }
    return {sol.head(n_), sol.segment(n_, p_), sol.tail(m_)};
  }

 private:
  Vector apply(const Vector& sol) const {
    Vector out(n_ + p_ + m_);
    const auto x = sol.head(n_);
    const auto y = sol.segment(n_, p_);
    const auto z = sol.tail(m_);
    out.head(n_) = P_ * x + A_.transpose() * y + G_.transpose() * z;
    out.segment(n_, p_) = A_ * x;
    out.tail(m_) = G_ * x - w_.cwiseProduct(z);
    return out;
  }

  static constexpr double kReg = 1e-11;
  const SpMat& P_;
  const SpMat& A_;
  const SpMat& G_;
  Eigen::Index n_, p_, m_;
  SpMat base_;
  Vector diag_, w_;
  double primal_reg_ = 0.0;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

}  // namespace

int QpBuilder::add_variable(double lb, double ub) {
  lb_.push_back(lb);
  ub_.push_back(ub);
  q_.push_back(0.0);
  return static_cast<int>(lb_.size()) - 1;
}

void QpBuilder::set_bounds(int var, double lb, double ub) {
  lb_.at(var) = lb;
  ub_.at(var) = ub;
}

void QpBuilder::add_squared(const std::vector<Term>& terms, double offset, double weight) {
  for (const auto& [i, ai] : terms) {
    for (const auto& [j, aj] : terms) p_.emplace_back(i, j, 2.0 * weight * ai * aj);
    q_.at(i) += 2.0 * weight * offset * ai;
  }
  constant_ += weight * offset * offset;
}

void QpBuilder::add_linear(int var, double coeff) { q_.at(var) += coeff; }

void QpBuilder::add_equality(const std::vector<Term>& terms, double rhs) {
  const int row = static_cast<int>(b_.size());
  for (const auto& [i, a] : terms) a_.emplace_back(row, i, a);
  b_.push_back(rhs);
}

void QpBuilder::add_inequality(const std::vector<Term>& terms, double rhs) {
  const int row = static_cast<int>(h_.size());
  for (const auto& [i, a] : terms) g_.emplace_back(row, i, a);
  h_.push_back(rhs);
}

QpResult QpBuilder::solve(const QpOptions& options) const {
  const int n = num_variables();
  std::vector<Eigen::Triplet<double>> a_trips = a_, g_trips = g_;
  std::vector<double> b = b_, h = h_;
  for (int i = 0; i < n; ++i) {
    if (lb_[i] == ub_[i]) {
      a_trips.emplace_back(static_cast<int>(b.size()), i, 1.0);
      b.push_back(lb_[i]);
      continue;
    }
    if (std::isfinite(ub_[i])) {
      g_trips.emplace_back(static_cast<int>(h.size()), i, 1.0);
      h.push_back(ub_[i]);
    }
    if (std::isfinite(lb_[i])) {
      g_trips.emplace_back(static_cast<int>(h.size()), i, -1.0);
      h.push_back(-lb_[i]);
    }
  }
  const auto p = static_cast<Eigen::Index>(b.size());
  const auto m = static_cast<Eigen::Index>(h.size());

  SpMat P(n, n), A(p, n), G(m, n);
  P.setFromTriplets(p_.begin(), p_.end());
  A.setFromTriplets(a_trips.begin(), a_trips.end());
  G.setFromTriplets(g_trips.begin(), g_trips.end());
  const Vector q = Eigen::Map<const Vector>(q_.data(), n);
  const Vector bv = Eigen::Map<const Vector>(b.data(), p);
  const Vector hv = Eigen::Map<const Vector>(h.data(), m);

  QpResult result;
  KktSolver kkt(P, A, G);

  // Starting point: least squares on the inequality residual.
  if (!kkt.factor(Vector::Ones(m))) return result;
  auto [x, y, z0] = kkt.solve(-q, bv, hv);
  Vector s = (hv - G * x).cwiseMax(1.0);
  Vector z = Vector::Ones(m);

  const double scale_b = 1.0 + inf_norm(bv);
  const double scale_h = 1.0 + inf_norm(hv);
  const double scale_q = 1.0 + inf_norm(q);
  const double tol = options.tolerance;

  auto objective = [&](const Vector& v) { return 0.5 * v.dot(P * v) + q.dot(v) + constant_; };

  double best_merit = kInf;
  Vector best_x;
  int stall = 0;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter;
    const Vector r_d = P * x + q + A.transpose() * y + G.transpose() * z;
    const Vector r_p = A * x - bv;
    const Vector r_g = G * x + s - hv;
    const double mu = m > 0 ? s.dot(z) / m : 0.0;
    const double gap = m > 0 ? s.cwiseProduct(z).maxCoeff() : 0.0;
    const double obj = objective(x);
    const double merit = std::max({inf_norm(r_p) / scale_b, inf_norm(r_g) / scale_h,
                                   inf_norm(r_d) / scale_q, gap / (1.0 + std::abs(obj))});
    if (merit < best_merit) {
      // Near the solution the reduced system loses digits; keep the best point.
      if (merit < 0.5 * best_merit) stall = 0;
      best_merit = merit;
      best_x = x;
    } else if (++stall >= 5) {
      break;
    }
    if (merit <= tol) break;
    if (!kkt.factor(s.cwiseQuotient(z))) break;

    auto direction = [&](const Vector& r_sz) {
      auto [dx, dy, dz] = kkt.solve(-r_d, -r_p, -r_g + r_sz.cwiseQuotient(z));
      Vector ds = -(r_sz + s.cwiseProduct(dz)).cwiseQuotient(z);
      return std::make_tuple(std::move(dx), std::move(dy), std::move(dz), std::move(ds));
    };

    const Vector r_sz_aff = s.cwiseProduct(z);
    auto [dx_a, dy_a, dz_a, ds_a] = direction(r_sz_aff);
    const double alpha_aff = std::min(max_step(s, ds_a), max_step(z, dz_a));
    double sigma = 0.0;
    if (m > 0 && mu > 0.0) {
      const double mu_aff =
          (s + alpha_aff * ds_a).dot(z + alpha_aff * dz_a) / static_cast<double>(m);
      sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);
    }
    const Vector r_sz =
        r_sz_aff + ds_a.cwiseProduct(dz_a) - Vector::Constant(m, sigma * mu);
    auto [dx, dy, dz, ds] = direction(r_sz);
    const double alpha = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(z, dz)));
    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
  }

  if (best_x.size() == 0) return result;
  result.residual = best_merit;
  result.status = best_merit <= options.accept_tolerance ? QpStatus::kOptimal
                                                         : QpStatus::kMaxIterations;
  result.objective = objective(best_x);
  result.x = std::move(best_x);
  return result;
}

}  // namespace flexio
