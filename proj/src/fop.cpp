#include "flexio/fop.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "flexio/model.hpp"

namespace flexio {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One shifting variable. Its marginal gain is b + kappa (up) or b - kappa (down).
struct Ramp {
  double b = 0.0;
  double c = 0.0;
  double cap = 0.0;
  bool up = true;
  Eigen::Index hour = 0;

  double gain(double kappa) const { return up ? b + kappa : b - kappa; }

  // Set of optimal responses at a given multiplier.
  std::pair<double, double> response(double kappa) const {
    if (cap <= 0.0) return {0.0, 0.0};
    const double a = gain(kappa);
    if (c > 0.0) {
      const double v = std::clamp(a / (2.0 * c), 0.0, cap);
      return {v, v};
    }
    if (a > 0.0) return {cap, cap};
    if (a < 0.0) return {0.0, 0.0};
    return {0.0, cap};
  }

  void breakpoints(std::vector<double>& out) const {
    if (cap <= 0.0) return;
    out.push_back(up ? -b : b);
    if (c > 0.0) out.push_back(up ? 2.0 * c * cap - b : b - 2.0 * c * cap);
  }
};

struct GapRange {
  double lo = 0.0;
  double hi = 0.0;
};

GapRange gap_at(const std::vector<Ramp>& ramps, double kappa) {
  GapRange g;
  for (const auto& r : ramps) {
    const auto [lo, hi] = r.response(kappa);
    if (r.up) {
      g.lo += lo;
      g.hi += hi;
    } else {
      g.lo -= hi;
      g.hi -= lo;
    }
  }
  return g;
}

// Gap on an open interval between breakpoints is affine: alpha + beta * kappa.
std::pair<double, double> affine_gap(const std::vector<Ramp>& ramps, double probe) {
  double alpha = 0.0;
  double beta = 0.0;
  for (const auto& r : ramps) {
    if (r.cap <= 0.0) continue;
    const double sign = r.up ? 1.0 : -1.0;
    const double a = r.gain(probe);
    if (r.c > 0.0 && a > 0.0 && a < 2.0 * r.c * r.cap) {
      alpha += sign * r.b / (2.0 * r.c);
      beta += 1.0 / (2.0 * r.c);
    } else {
      alpha += sign * r.response(probe).first;
    }
  }
  return {alpha, beta};
}

double kappa_bracket_lo(const PriceSignal& z) {
  return std::min((z.p - z.sf_plus).minCoeff(), -(z.p + z.sf_minus).maxCoeff()) - 1.0;
}

double kappa_bracket_hi(const PriceSignal& z) {
  return std::max((z.p + z.sf_minus).maxCoeff(), (z.p + z.sf_plus).maxCoeff()) + 1.0;
}

// Multiplier that balances the ramps; see solve_shift_given_binaries.
double balancing_kappa(const std::vector<Ramp>& ramps, double bracket_lo, double bracket_hi) {
  std::vector<double> bps;
  double total_cap = 0.0;
  for (const auto& r : ramps) {
    r.breakpoints(bps);
    total_cap += r.cap;
  }
  if (bps.empty()) return 0.0;
  std::sort(bps.begin(), bps.end());
  bps.erase(std::unique(bps.begin(), bps.end()), bps.end());
  const double tol = 1e-12 * (1.0 + total_cap);

  double z_lo = kInf;
  double z_hi = -kInf;
  auto accept = [&](double lo, double hi) {
    z_lo = std::min(z_lo, lo);
    z_hi = std::max(z_hi, hi);
  };
  const std::size_t m = bps.size();
  for (std::size_t i = 0; i <= m; ++i) {
    const double left = i == 0 ? -kInf : bps[i - 1];
    const double right = i == m ? kInf : bps[i];
    double probe;
    if (i == 0) {
      probe = right - 1.0;
    } else if (i == m) {
      probe = left + 1.0;
    } else {
      probe = 0.5 * (left + right);
    }
    const auto [alpha, beta] = affine_gap(ramps, probe);
    if (beta > 0.0) {
      const double root = -alpha / beta;
      if (root > left && root < right) accept(root, root);
    } else if (std::abs(alpha) <= tol) {
      accept(left, right);
    }
    if (i < m) {
      const GapRange g = gap_at(ramps, bps[i]);
      if (g.lo <= tol && g.hi >= -tol) accept(bps[i], bps[i]);
    }
  }

  if (z_lo > z_hi) {
    // Numerically missed the crossing; fall back to bisection on the midpoint gap.
    double lo = bracket_lo;
    double hi = bracket_hi;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const GapRange g = gap_at(ramps, mid);
      if (0.5 * (g.lo + g.hi) < 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  }
  if (std::isinf(z_lo) && std::isinf(z_hi)) return 0.0;
  if (std::isfinite(z_lo) && std::isfinite(z_hi)) return 0.5 * (z_lo + z_hi);
  const double lo = std::isfinite(z_lo) ? z_lo : std::min(bracket_lo, z_hi);
  const double hi = std::isfinite(z_hi) ? z_hi : std::max(bracket_hi, z_lo);
  return 0.5 * (lo + hi);
}

std::vector<Ramp> make_ramps(const PriceSignal& prices, const ComfortCosts& costs,
                             const Vector& env_plus, const Vector& env_minus,
                             const BinaryVector& delta_plus, const BinaryVector& delta_minus) {
  std::vector<Ramp> ramps;
  for (Eigen::Index t = 0; t < prices.size(); ++t) {
    if (delta_plus(t) && env_plus(t) > 0.0) {
      ramps.push_back({prices.sf_plus(t) - prices.p(t), costs.sf_plus(t), env_plus(t), true, t});
    }
    if (delta_minus(t) && env_minus(t) > 0.0) {
      ramps.push_back(
          {prices.sf_minus(t) + prices.p(t), costs.sf_minus(t), env_minus(t), false, t});
    }
  }
  return ramps;
}

// Value of one shifting option at a fixed multiplier, max_{0<=d<=cap} -c d^2 + a d.
double option_value(double b, double c, double cap, double kappa, bool up) {
  if (cap <= 0.0) return 0.0;
  const double a = up ? b + kappa : b - kappa;
  if (c > 0.0) {
    const double d = std::clamp(a / (2.0 * c), 0.0, cap);
    return -c * d * d + a * d;
  }
  return a > 0.0 ? a * cap : 0.0;
}

enum class Choice : std::int8_t { kFree = -1, kIdle = 0, kUp = 1, kDown = 2 };

struct ShiftProblem {
  Vector b_up, c_up, e_up;
  Vector b_dn, c_dn, e_dn;
  int t_max = 0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  // Hours with identical data, in increasing hour order. Within a class the
  // choices are kept nonincreasing in rank (up > down > idle).
  std::vector<std::vector<Eigen::Index>> classes;
  // up_dom[i]: hours with the same up price and cost as i and a larger up
  // envelope (ties broken by class, then hour). Moving an up action from i to
  // an idle dominating hour never lowers utility. Same for down.
  std::vector<std::vector<Eigen::Index>> up_dom, dn_dom, up_sub, dn_sub;

  Eigen::Index size() const { return b_up.size(); }

  void build_classes() {
    const auto n = size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    auto key = [&](Eigen::Index t) {
      return std::array<double, 6>{b_up(t), c_up(t), e_up(t), b_dn(t), c_dn(t), e_dn(t)};
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return key(a) < key(b); });
    classes.clear();
    std::vector<std::size_t> class_of(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i == 0 || key(order[i]) != key(order[i - 1])) classes.emplace_back();
      classes.back().push_back(order[i]);
      class_of[static_cast<std::size_t>(order[i])] = classes.size() - 1;
    }
    for (auto& cls : classes) std::sort(cls.begin(), cls.end());

    auto build = [&](const Vector& b, const Vector& c, const Vector& e,
                     std::vector<std::vector<Eigen::Index>>& dom,
                     std::vector<std::vector<Eigen::Index>>& sub) {
      dom.assign(static_cast<std::size_t>(n), {});
      sub.assign(static_cast<std::size_t>(n), {});
      auto ahead = [&](Eigen::Index j, Eigen::Index i) {
        if (e(j) != e(i)) return e(j) > e(i);
        const auto cj = class_of[static_cast<std::size_t>(j)];
        const auto ci = class_of[static_cast<std::size_t>(i)];
        return cj != ci ? cj < ci : j < i;
      };
      for (Eigen::Index i = 0; i < n; ++i) {
        if (e(i) <= 0.0) continue;
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j != i && b(j) == b(i) && c(j) == c(i) && ahead(j, i)) {
            dom[static_cast<std::size_t>(i)].push_back(j);
            sub[static_cast<std::size_t>(j)].push_back(i);
          }
        }
      }
    };
    build(b_up, c_up, e_up, up_dom, up_sub);
    build(b_dn, c_dn, e_dn, dn_dom, dn_sub);
  }

  double up_value(Eigen::Index t, double kappa) const {
    return option_value(b_up(t), c_up(t), e_up(t), kappa, true);
  }
  double dn_value(Eigen::Index t, double kappa) const {
    return option_value(b_dn(t), c_dn(t), e_dn(t), kappa, false);
  }

  // Best free option at kappa and its value; ties prefer idle, then up.
  std::pair<Choice, double> best_free(Eigen::Index t, double kappa) const {
    Choice best = Choice::kIdle;
    double value = 0.0;
    if (e_up(t) > 0.0) {
      const double v = up_value(t, kappa);
      if (v > value) {
        value = v;
        best = Choice::kUp;
      }
    }
    if (e_dn(t) > 0.0) {
      const double v = dn_value(t, kappa);
      if (v > value) {
        value = v;
        best = Choice::kDown;
      }
    }
    return {best, value};
  }
};

struct Node {
  std::vector<Choice> fixed;
  double bound = kInf;
  double kappa = 0.0;
};

int rank(Choice c) {
  switch (c) {
    case Choice::kUp:
      return 3;
    case Choice::kDown:
      return 2;
    default:
      return 1;
  }
}

constexpr std::uint8_t kAllowIdle = 1;
constexpr std::uint8_t kAllowDown = 2;
constexpr std::uint8_t kAllowUp = 4;

// Options still open to every free hour given the fixed hours: the rank order
// inside classes of identical hours plus the envelope dominance rules.
std::vector<std::uint8_t> allowed_options(const ShiftProblem& pb, const std::vector<Choice>& fixed) {
  const auto n = static_cast<std::size_t>(pb.size());
  std::vector<std::uint8_t> mask(n, 0);
  auto rank_mask = [](int lo, int hi) {
    std::uint8_t m = 0;
    if (lo <= 1 && hi >= 1) m |= kAllowIdle;
    if (lo <= 2 && hi >= 2) m |= kAllowDown;
    if (lo <= 3 && hi >= 3) m |= kAllowUp;
    return m;
  };
  for (const auto& cls : pb.classes) {
    std::vector<int> hi(cls.size(), 3);
    std::vector<int> lo(cls.size(), 1);
    int cap = 3;
    for (std::size_t k = 0; k < cls.size(); ++k) {
      if (fixed[cls[k]] != Choice::kFree) cap = std::min(cap, rank(fixed[cls[k]]));
      hi[k] = cap;
    }
    int floor = 1;
    for (std::size_t k = cls.size(); k-- > 0;) {
      if (fixed[cls[k]] != Choice::kFree) floor = std::max(floor, rank(fixed[cls[k]]));
      lo[k] = floor;
    }
    for (std::size_t k = 0; k < cls.size(); ++k) mask[cls[k]] = rank_mask(lo[k], hi[k]);
  }
  for (std::size_t t = 0; t < n; ++t) {
    if (fixed[t] != Choice::kFree) continue;
    if (pb.e_up(static_cast<Eigen::Index>(t)) <= 0.0) mask[t] &= ~kAllowUp;
    if (pb.e_dn(static_cast<Eigen::Index>(t)) <= 0.0) mask[t] &= ~kAllowDown;
    for (Eigen::Index j : pb.up_dom[t]) {
      if (fixed[j] == Choice::kIdle) mask[t] &= ~kAllowUp;
    }
    for (Eigen::Index j : pb.dn_dom[t]) {
      if (fixed[j] == Choice::kIdle) mask[t] &= ~kAllowDown;
    }
    for (Eigen::Index i : pb.up_sub[t]) {
      if (fixed[i] == Choice::kUp) mask[t] &= ~kAllowIdle;
    }
    for (Eigen::Index i : pb.dn_sub[t]) {
      if (fixed[i] == Choice::kDown) mask[t] &= ~kAllowIdle;
    }
  }
  return mask;
}

int active_fixed(const std::vector<Choice>& fixed) {
  return static_cast<int>(std::count_if(fixed.begin(), fixed.end(), [](Choice c) {
    return c == Choice::kUp || c == Choice::kDown;
  }));
}

// True when a fixed hour breaks a dominance rule against another fixed hour.
bool violates_dominance(const ShiftProblem& pb, const std::vector<Choice>& fixed) {
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    if (fixed[i] == Choice::kUp) {
      for (Eigen::Index j : pb.up_dom[i]) {
        if (fixed[j] == Choice::kIdle) return true;
      }
    } else if (fixed[i] == Choice::kDown) {
      for (Eigen::Index j : pb.dn_dom[i]) {
        if (fixed[j] == Choice::kIdle) return true;
      }
    }
  }
  return false;
}

// Lagrangian of the neutrality row at kappa, with the top-k rule for free hours.
// Optionally writes the selected pattern. -inf when the node is infeasible.
double lagrangian(const ShiftProblem& pb, const std::vector<Choice>& fixed,
                  const std::vector<std::uint8_t>& mask, double kappa, std::vector<Choice>* pattern) {
  const auto n = pb.size();
  double value = 0.0;
  int budget = pb.t_max - active_fixed(fixed);
  std::vector<std::pair<double, Eigen::Index>> candidates;
  std::vector<Choice> local(n, Choice::kIdle);
  for (Eigen::Index t = 0; t < n; ++t) {
    switch (fixed[t]) {
      case Choice::kUp:
        value += pb.up_value(t, kappa);
        local[t] = Choice::kUp;
        break;
      case Choice::kDown:
        value += pb.dn_value(t, kappa);
        local[t] = Choice::kDown;
        break;
      case Choice::kIdle:
        break;
      case Choice::kFree: {
        const std::uint8_t m = mask[t];
        Choice choice = Choice::kIdle;
        double v = (m & kAllowIdle) ? 0.0 : -kInf;
        if (m & kAllowUp) {
          const double u = pb.up_value(t, kappa);
          if (u > v) v = u, choice = Choice::kUp;
        }
        if (m & kAllowDown) {
          const double d = pb.dn_value(t, kappa);
          if (d > v) v = d, choice = Choice::kDown;
        }
        if (v == -kInf) return -kInf;
        if (!(m & kAllowIdle)) {
          value += v;
          local[t] = choice;
          --budget;
        } else if (choice != Choice::kIdle) {
          candidates.emplace_back(v, t);
          local[t] = choice;
        }
        break;
      }
    }
  }
  if (budget < 0) return -kInf;
  const auto k = static_cast<std::size_t>(budget);
  if (candidates.size() > k) {
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = k; i < candidates.size(); ++i) local[candidates[i].second] = Choice::kIdle;
    candidates.resize(k);
  }
  for (const auto& [v, t] : candidates) value += v;
  if (pattern) *pattern = std::move(local);
  return value;
}

// Golden-section minimization of the (convex) Lagrangian over the bracket.
std::pair<double, double> minimize_lagrangian(const ShiftProblem& pb,
                                              const std::vector<Choice>& fixed) {
  if (violates_dominance(pb, fixed)) return {0.0, -kInf};
  const std::vector<std::uint8_t> mask = allowed_options(pb, fixed);
  constexpr double kInvPhi = 0.6180339887498949;
  double a = pb.bracket_lo;
  double b = pb.bracket_hi;
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = lagrangian(pb, fixed, mask, x1, nullptr);
  double f2 = lagrangian(pb, fixed, mask, x2, nullptr);
  const double tol = 1e-13 * (1.0 + std::abs(a) + std::abs(b));
  while (b - a > tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = lagrangian(pb, fixed, mask, x1, nullptr);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = lagrangian(pb, fixed, mask, x2, nullptr);
    }
  }
  const double kappa = 0.5 * (a + b);
  return {kappa, lagrangian(pb, fixed, mask, kappa, nullptr)};
}

struct PatternResult {
  ShiftSolution shift;
  BinaryVector delta_plus;
  BinaryVector delta_minus;
  double value = 0.0;
};

double shift_value(const ShiftProblem& pb, const Vector& up, const Vector& dn) {
  return (-pb.c_up.array() * up.array().square() + pb.b_up.array() * up.array() -
          pb.c_dn.array() * dn.array().square() + pb.b_dn.array() * dn.array())
      .sum();
}

}  // namespace

Vector solve_shed(const PriceSignal& prices, const ComfortCosts& costs, const Vector& env_sd) {
  const auto n = prices.size();
  check_length(env_sd, n, "envelope sd");
  check_length(costs.sd, n, "cost c_sd");
  check_nonnegative(env_sd, "envelope sd");
  Vector out(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double gain = prices.sd(t) + prices.p(t);
    const double c = costs.sd(t);
    if (c > 0.0) {
      out(t) = std::clamp(gain / (2.0 * c), 0.0, env_sd(t));
    } else {
      out(t) = gain > 0.0 ? env_sd(t) : 0.0;
    }
  }
  return out;
}

ShiftSolution solve_shift_given_binaries(const PriceSignal& prices, const ComfortCosts& costs,
                                         const Vector& env_plus, const Vector& env_minus,
                                         const BinaryVector& delta_plus,
                                         const BinaryVector& delta_minus) {
  const auto n = prices.size();
  check_length(env_plus, n, "envelope sf_plus");
  check_length(env_minus, n, "envelope sf_minus");
  if (delta_plus.size() != n || delta_minus.size() != n) {
    throw InvalidInput("shift: binaries have wrong length");
  }
  for (Eigen::Index t = 0; t < n; ++t) {
    if (delta_plus(t) > 1 || delta_minus(t) > 1 || delta_plus(t) + delta_minus(t) > 1) {
      throw InvalidInput("shift: infeasible binaries (up and down in the same hour)");
    }
  }

  const auto ramps = make_ramps(prices, costs, env_plus, env_minus, delta_plus, delta_minus);
  ShiftSolution out;
  out.d_sf_plus = Vector::Zero(n);
  out.d_sf_minus = Vector::Zero(n);
  if (ramps.empty()) return out;

  const double kappa = balancing_kappa(ramps, kappa_bracket_lo(prices), kappa_bracket_hi(prices));
  out.kappa = kappa;

  double fixed_up = 0.0, fixed_dn = 0.0, flex_up = 0.0, flex_dn = 0.0;
  for (const auto& r : ramps) {
    const auto [lo, hi] = r.response(kappa);
    (r.up ? fixed_up : fixed_dn) += lo;
    (r.up ? flex_up : flex_dn) += hi - lo;
    (r.up ? out.d_sf_plus : out.d_sf_minus)(r.hour) = lo;
  }
  // Least total shifting that restores neutrality among indifferent hours.
  const double deficit = fixed_dn - fixed_up;
  const double fill_up = deficit > 0.0 && flex_up > 0.0 ? std::min(deficit, flex_up) / flex_up : 0.0;
  const double fill_dn =
      deficit < 0.0 && flex_dn > 0.0 ? std::min(-deficit, flex_dn) / flex_dn : 0.0;
  for (const auto& r : ramps) {
    const auto [lo, hi] = r.response(kappa);
    if (hi <= lo) continue;
    if (r.up) {
      out.d_sf_plus(r.hour) = lo + fill_up * (hi - lo);
    } else {
      out.d_sf_minus(r.hour) = lo + fill_dn * (hi - lo);
    }
  }
  return out;
}

KktCertificate certificate_for(const FlexDecision& theta, double kappa,
                               const PriceSignal& prices, const ComfortCosts& costs) {
  const auto n = prices.size();
  KktCertificate cert;
  cert.kappa = kappa;
  cert.mu_plus = Vector::Zero(n);
  cert.mu_minus = Vector::Zero(n);
  cert.mu_zero = Vector::Zero(n);
  cert.nu_plus = Vector::Zero(n);
  cert.nu_minus = Vector::Zero(n);
  cert.nu_zero = Vector::Zero(n);
  auto split = [](double r, double& mu, double& nu) {
    if (r > 0.0) {
      mu = r;
    } else {
      nu = -r;
    }
  };
  for (Eigen::Index t = 0; t < n; ++t) {
    const double r_up = -2.0 * costs.sf_plus(t) * theta.d_sf_plus(t) + prices.sf_plus(t) -
                        prices.p(t) + kappa;
    const double r_dn = -2.0 * costs.sf_minus(t) * theta.d_sf_minus(t) + prices.sf_minus(t) +
                        prices.p(t) - kappa;
    const double r_sd =
        -2.0 * costs.sd(t) * theta.d_sd_minus(t) + prices.sd(t) + prices.p(t);
    split(r_up, cert.mu_plus(t), cert.nu_plus(t));
    split(r_dn, cert.mu_minus(t), cert.nu_minus(t));
    split(r_sd, cert.mu_zero(t), cert.nu_zero(t));
  }
  return cert;
}

FopSolution make_fop_solution(FlexDecision theta, double kappa, const PriceSignal& prices,
                              const ComfortCosts& costs, const DemandAttributes& attrs,
                              const Vector& gen) {
  FopSolution sol;
  sol.certificate = certificate_for(theta, kappa, prices, costs);
  sol.utility = consumer_utility(theta, prices, costs, attrs, gen);
  sol.d_sf = theta.d_sf_plus - theta.d_sf_minus;
  sol.d_sd = attrs.env_sd - theta.d_sd_minus;
  sol.theta = std::move(theta);
  return sol;
}

FopSolution solve_fop(const PriceSignal& prices, const ComfortCosts& costs,
                      const DemandAttributes& attrs, int t_max, const Vector& gen,
                      const FopOptions& options) {
  const auto n = prices.size();
  if (n < 1) throw InvalidInput("fop: empty horizon");
  prices.validate(n);
  costs.validate(n);
  attrs.validate(n);
  check_length(gen, n, "generation");
  check_finite(gen, "generation");
  if (t_max < 0 || t_max > n) throw InvalidInput("fop: t_max outside [0, T]");

  ShiftProblem pb;
  pb.b_up = prices.sf_plus - prices.p;
  pb.c_up = costs.sf_plus;
  pb.e_up = attrs.env_sf_plus;
  pb.b_dn = prices.sf_minus + prices.p;
  pb.c_dn = costs.sf_minus;
  pb.e_dn = attrs.env_sf_minus;
  pb.t_max = t_max;
  pb.bracket_lo = kappa_bracket_lo(prices);
  pb.bracket_hi = kappa_bracket_hi(prices);
  pb.build_classes();

  PatternResult best;
  best.delta_plus = BinaryVector::Zero(n);
  best.delta_minus = BinaryVector::Zero(n);
  best.shift.d_sf_plus = Vector::Zero(n);
  best.shift.d_sf_minus = Vector::Zero(n);
  best.value = 0.0;

  auto evaluate_pattern = [&](const std::vector<Choice>& pattern) {
    BinaryVector dp = BinaryVector::Zero(n);
    BinaryVector dm = BinaryVector::Zero(n);
    for (Eigen::Index t = 0; t < n; ++t) {
      if (pattern[t] == Choice::kUp) dp(t) = 1;
      if (pattern[t] == Choice::kDown) dm(t) = 1;
    }
    ShiftSolution s = solve_shift_given_binaries(prices, costs, pb.e_up, pb.e_dn, dp, dm);
    const double v = shift_value(pb, s.d_sf_plus, s.d_sf_minus);
    if (v > best.value + 1e-12 * (1.0 + std::abs(best.value))) {
      // Drop binaries of hours that ended up unused.
      for (Eigen::Index t = 0; t < n; ++t) {
        if (s.d_sf_plus(t) == 0.0) dp(t) = 0;
        if (s.d_sf_minus(t) == 0.0) dm(t) = 0;
      }
      best = {std::move(s), std::move(dp), std::move(dm), v};
    }
  };

  int nodes = 0;
  const bool any_shift = t_max > 0 && (pb.e_up.array() > 0.0).any() && (pb.e_dn.array() > 0.0).any();
  if (any_shift) {
    std::vector<Node> stack;
    Node root;
    root.fixed.assign(n, Choice::kFree);
    std::tie(root.kappa, root.bound) = minimize_lagrangian(pb, root.fixed);
    stack.push_back(std::move(root));
    while (!stack.empty() && nodes < options.max_nodes) {
      Node node = std::move(stack.back());
      stack.pop_back();
      const double prune_at = best.value + options.gap_tol * (1.0 + std::abs(best.value));
      if (node.bound <= prune_at) continue;
      ++nodes;

      const double eps = 1e-7 * (1.0 + std::abs(node.kappa));
      std::vector<Choice> left, mid, right;
      const std::vector<std::uint8_t> mask = allowed_options(pb, node.fixed);
      if (lagrangian(pb, node.fixed, mask, node.kappa - eps, &left) == -kInf ||
          lagrangian(pb, node.fixed, mask, node.kappa, &mid) == -kInf ||
          lagrangian(pb, node.fixed, mask, node.kappa + eps, &right) == -kInf) {
        continue;
      }
      evaluate_pattern(mid);
      if (left != mid) evaluate_pattern(left);
      if (right != mid && right != left) evaluate_pattern(right);
      if (node.bound <= best.value + options.gap_tol * (1.0 + std::abs(best.value))) continue;

      // Branch on a free hour whose dual choice is least settled; otherwise on the
      // hour at the cardinality cutoff, otherwise on the hour where both
      // directions pay the most.
      Eigen::Index branch = -1;
      double score = -kInf;
      std::vector<std::pair<double, Eigen::Index>> ranked;
      for (Eigen::Index t = 0; t < n; ++t) {
        if (node.fixed[t] != Choice::kFree) continue;
        const double v = pb.best_free(t, node.kappa).second;
        if (left[t] != right[t] || left[t] != mid[t]) {
          if (1e300 + v > score) {
            score = 1e300 + v;
            branch = t;
          }
        }
        if (v > 0.0) ranked.emplace_back(v, t);
      }
      const auto budget = static_cast<std::size_t>(std::max(t_max - active_fixed(node.fixed), 0));
      if (branch < 0 && ranked.size() > budget && budget > 0) {
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        const double cut = 0.5 * (ranked[budget - 1].first + ranked[budget].first);
        double best_dist = kInf;
        for (const auto& [v, t] : ranked) {
          if (std::abs(v - cut) < best_dist) {
            best_dist = std::abs(v - cut);
            branch = t;
          }
        }
      }
      if (branch < 0) {
        for (const auto& [v, t] : ranked) {
          const double second = std::min(pb.e_up(t) > 0.0 ? pb.up_value(t, node.kappa) : 0.0,
                                         pb.e_dn(t) > 0.0 ? pb.dn_value(t, node.kappa) : 0.0);
          if (second > 0.0 && second > score) {
            score = second;
            branch = t;
          }
        }
      }
      if (branch < 0) {
        for (Eigen::Index t = 0; t < n; ++t) {
          if (node.fixed[t] == Choice::kFree && (left[t] != right[t] || left[t] != mid[t])) {
            branch = t;
            break;
          }
        }
      }
      if (branch < 0 && !ranked.empty()) branch = ranked.front().second;
      if (branch < 0) {
        for (Eigen::Index t = 0; t < n; ++t) {
          if (node.fixed[t] == Choice::kFree && (pb.e_up(t) > 0.0 || pb.e_dn(t) > 0.0)) {
            branch = t;
            break;
          }
        }
      }
      if (branch < 0) continue;

      const bool room = active_fixed(node.fixed) < t_max;
      std::vector<Node> children;
      for (Choice c : {Choice::kUp, Choice::kDown, Choice::kIdle}) {
        if (c == Choice::kUp && (!(mask[branch] & kAllowUp) || !room)) continue;
        if (c == Choice::kDown && (!(mask[branch] & kAllowDown) || !room)) continue;
        if (c == Choice::kIdle && !(mask[branch] & kAllowIdle)) continue;
        Node child;
        child.fixed = node.fixed;
        child.fixed[branch] = c;
        std::tie(child.kappa, child.bound) = minimize_lagrangian(pb, child.fixed);
        children.push_back(std::move(child));
      }
      // Depth-first; the child with the best bound is explored first.
      std::stable_sort(children.begin(), children.end(),
                       [](const Node& a, const Node& b) { return a.bound < b.bound; });
      for (auto& c : children) stack.push_back(std::move(c));
    }
  }

  FlexDecision theta;
  theta.d_sf_plus = best.shift.d_sf_plus;
  theta.d_sf_minus = best.shift.d_sf_minus;
  theta.d_sd_minus = solve_shed(prices, costs, attrs.env_sd);
  theta.delta_plus = best.delta_plus;
  theta.delta_minus = best.delta_minus;
  const bool shifted = theta.delta_plus.any() || theta.delta_minus.any();
  FopSolution sol =
      make_fop_solution(std::move(theta), shifted ? best.shift.kappa : 0.0, prices, costs, attrs, gen);
  sol.nodes = nodes;
  return sol;
}

double kkt_residual(const FopSolution& solution, const PriceSignal& prices,
                    const ComfortCosts& costs, const DemandAttributes& attrs) {
  const auto& th = solution.theta;
  const auto& k = solution.certificate;
  const auto n = prices.size();
  double r = 0.0;
  auto upd = [&r](double v) { r = std::max(r, std::abs(v)); };
  upd(th.d_sf_plus.sum() - th.d_sf_minus.sum());
  for (Eigen::Index t = 0; t < n; ++t) {
    const double cap_up = attrs.env_sf_plus(t) * th.delta_plus(t);
    const double cap_dn = attrs.env_sf_minus(t) * th.delta_minus(t);
    const double cap_sd = attrs.env_sd(t);
    upd(-2.0 * costs.sf_plus(t) * th.d_sf_plus(t) + prices.sf_plus(t) - prices.p(t) + k.kappa -
        k.mu_plus(t) + k.nu_plus(t));
    upd(-2.0 * costs.sf_minus(t) * th.d_sf_minus(t) + prices.sf_minus(t) + prices.p(t) -
        k.kappa - k.mu_minus(t) + k.nu_minus(t));
    upd(-2.0 * costs.sd(t) * th.d_sd_minus(t) + prices.sd(t) + prices.p(t) - k.mu_zero(t) +
        k.nu_zero(t));
    upd(k.mu_plus(t) * (cap_up - th.d_sf_plus(t)));
    upd(k.mu_minus(t) * (cap_dn - th.d_sf_minus(t)));
    upd(k.mu_zero(t) * (cap_sd - th.d_sd_minus(t)));
    upd(k.nu_plus(t) * th.d_sf_plus(t));
    upd(k.nu_minus(t) * th.d_sf_minus(t));
    upd(k.nu_zero(t) * th.d_sd_minus(t));
    for (double dual : {k.mu_plus(t), k.mu_minus(t), k.mu_zero(t), k.nu_plus(t), k.nu_minus(t),
                        k.nu_zero(t)}) {
      upd(std::min(dual, 0.0));
    }
    upd(std::max(th.d_sf_plus(t) - cap_up, 0.0));
    upd(std::max(th.d_sf_minus(t) - cap_dn, 0.0));
    upd(std::max(th.d_sd_minus(t) - cap_sd, 0.0));
    upd(std::min(th.d_sf_plus(t), 0.0));
    upd(std::min(th.d_sf_minus(t), 0.0));
    upd(std::min(th.d_sd_minus(t), 0.0));
    if (th.delta_plus(t) + th.delta_minus(t) > 1) upd(1.0);
  }
  return r;
}

}  // namespace flexio
