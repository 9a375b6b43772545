#include "flexio/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>

#include "flexio/model.hpp"
#include "flexio/parallel.hpp"
#include "flexio/qp.hpp"

namespace flexio {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Shifts below this are treated as zero when reading back a relaxation.
constexpr double kSnap = 1e-9;
// Allowed gap between the multiplier bounds implied by a decision.
constexpr double kKappaTol = 1e-7;
// Largest days * periods for which the alternating search is widened.
constexpr long kDeskCells = 120;

// Largest shift one hour can show for a given neutrality multiplier, when its
// envelope is free in [0, K]: clip(gain / 2c, 0, K), or a step at zero gain
// when c = 0. Upper semicontinuous in kappa.
struct Cap {
  double b = 0.0;
  double c = 0.0;
  double K = 0.0;
  bool up = true;

  double gain(double kappa) const { return up ? b + kappa : b - kappa; }

  double at(double kappa) const {
    if (K <= 0.0) return 0.0;
    const double g = gain(kappa);
    if (c > 0.0) return std::clamp(g / (2.0 * c), 0.0, K);
    return g >= 0.0 ? K : 0.0;
  }

  // a0 + a1 * kappa on the open piece containing `probe`.
  std::pair<double, double> piece(double probe) const {
    if (K <= 0.0) return {0.0, 0.0};
    const double g = gain(probe);
    if (c > 0.0) {
      const double r = g / (2.0 * c);
      if (r <= 0.0) return {0.0, 0.0};
      if (r >= K) return {K, 0.0};
      return {b / (2.0 * c), (up ? 1.0 : -1.0) / (2.0 * c)};
    }
    return {g > 0.0 ? K : 0.0, 0.0};
  }

  void breakpoints(std::vector<double>& out) const {
    if (K <= 0.0) return;
    out.push_back(up ? -b : b);
    if (c > 0.0) out.push_back(up ? 2.0 * c * K - b : b - 2.0 * c * K);
  }

  // Multiplier bound needed to support a shift of size v > 0: a lower bound
  // for upward caps, an upper bound for downward ones.
  double support(double v) const {
    if (c > 0.0) return up ? 2.0 * c * v - b : b - 2.0 * c * v;
    return up ? -b : b;
  }
};

struct DayData {
  double w = 0.0;
  Vector y;  // observed demand plus generation
  std::vector<Cap> up, dn;
  Vector U;  // largest kept shed
  std::vector<double> bps;

  Eigen::Index periods() const { return y.size(); }

  // Elements alternate: interval, breakpoint, interval, ..., interval. The two
  // outer rays are cut to unit length; every cap is constant on them.
  int elements() const { return bps.empty() ? 1 : 2 * static_cast<int>(bps.size()) + 1; }

  bool is_point(int k) const { return !bps.empty() && k % 2 == 1; }

  std::pair<double, double> range(int k) const {
    if (bps.empty()) return {0.0, 0.0};
    const int m = static_cast<int>(bps.size());
    if (k % 2 == 1) return {bps[(k - 1) / 2], bps[(k - 1) / 2]};
    const int j = k / 2;
    const double lo = j == 0 ? bps.front() - 1.0 : bps[j - 1];
    const double hi = j == m ? bps.back() + 1.0 : bps[j];
    return {lo, hi};
  }

  int element_of(double kappa) const {
    if (bps.empty()) return 0;
    const auto it = std::lower_bound(bps.begin(), bps.end(), kappa);
    const int i = static_cast<int>(it - bps.begin());
    auto same = [&](double b) { return std::abs(b - kappa) <= 1e-12 * (1.0 + std::abs(b)); };
    if (i < static_cast<int>(bps.size()) && same(bps[i])) return 2 * i + 1;
    if (i > 0 && same(bps[i - 1])) return 2 * i - 1;
    return 2 * i;
  }

  double clamp_kappa(double kappa) const {
    if (bps.empty()) return 0.0;
    return std::clamp(kappa, bps.front() - 1.0, bps.back() + 1.0);
  }
};

struct Segment {
  double intercept = 0.0;
  double slope = 0.0;
};

// Upper concave envelope of a cap over the closure of elements lo..hi, and
// the envelope's largest value.
std::vector<Segment> hull(const Cap& cap, const DayData& d, int lo, int hi, double& peak) {
  const double left = d.range(lo).first;
  const double right = d.range(hi).second;
  auto inner_value = [&](int k, double at) {
    const auto [a, b] = d.range(k);
    const auto [a0, a1] = cap.piece(0.5 * (a + b));
    return a0 + a1 * at;
  };
  std::vector<std::pair<double, double>> pts;
  pts.emplace_back(left, d.is_point(lo) ? cap.at(left) : inner_value(lo, left));
  for (double b : d.bps) {
    if (b > left && b < right) pts.emplace_back(b, cap.at(b));
  }
  if (right > left) pts.emplace_back(right, d.is_point(hi) ? cap.at(right) : inner_value(hi, right));

  std::vector<std::pair<double, double>> h;
  for (const auto& p : pts) {
    while (h.size() >= 2) {
      const auto& a = h[h.size() - 2];
      const auto& b = h.back();
      const double cross = (b.first - a.first) * (p.second - a.second) -
                           (b.second - a.second) * (p.first - a.first);
      if (cross < 0.0) break;
      h.pop_back();
    }
    h.push_back(p);
  }
  std::vector<Segment> out;
  peak = 0.0;
  for (const auto& p : h) peak = std::max(peak, p.second);
  if (h.size() == 1) {
    out.push_back({h[0].second, 0.0});
    return out;
  }
  for (std::size_t i = 0; i + 1 < h.size(); ++i) {
    const double slope = (h[i + 1].second - h[i].second) / (h[i + 1].first - h[i].first);
    out.push_back({h[i].second - slope * h[i].first, slope});
  }
  return out;
}

struct DayState {
  int lo = 0;
  int hi = 0;
  std::vector<std::int8_t> z;  // -1 free, 0 forced idle, 1 counted as shifting
};

struct DayPoint {
  Vector x;  // net shift d_sf_plus - d_sf_minus
  Vector e;  // kept shed
  double kappa = 0.0;
  Vector z;
};

struct NodeResult {
  bool ok = false;
  double obj = kInf;
  Vector d_bl;
  std::vector<DayPoint> days;
};

struct KappaCheck {
  double violation = 0.0;
  int active = 0;
  double kappa = 0.0;
};

KappaCheck check_day(const DayData& d, const Vector& x) {
  double lo = -kInf;
  double hi = kInf;
  KappaCheck out;
  for (Eigen::Index t = 0; t < d.periods(); ++t) {
    if (x(t) > kSnap) {
      lo = std::max(lo, d.up[t].support(x(t)));
      ++out.active;
    } else if (x(t) < -kSnap) {
      hi = std::min(hi, d.dn[t].support(-x(t)));
      ++out.active;
    }
  }
  out.violation = std::max(lo - hi, 0.0);
  if (d.bps.empty()) return out;
  const double lo_c = std::clamp(lo, d.bps.front() - 1.0, d.bps.back() + 1.0);
  const double hi_c = std::clamp(hi, d.bps.front() - 1.0, d.bps.back() + 1.0);
  out.kappa = 0.5 * (lo_c + hi_c);
  return out;
}

struct Candidate {
  double obj = kInf;
  Vector d_bl;
  std::vector<DayPoint> days;  // indexed like the problem's day list
};

class Problem {
 public:
  Problem(std::vector<DayData> days, int t_max, double penalty)
      : days_(std::move(days)), t_max_(t_max), penalty_(penalty) {
    periods_ = days_.front().periods();
    use_card_ = t_max_ < periods_;
  }

  const DayData& day(int s) const { return days_[s]; }
  int size() const { return static_cast<int>(days_.size()); }
  Eigen::Index periods() const { return periods_; }
  int t_max() const { return t_max_; }
  bool use_card() const { return use_card_; }

  DayState root_state(int s) const {
    DayState st;
    st.lo = 0;
    st.hi = days_[s].elements() - 1;
    if (use_card_) st.z.assign(periods_, -1);
    return st;
  }

  // State that pins a day to the element holding kappa and to its active hours.
  DayState pinned_state(int s, const DayPoint& p) const {
    DayState st;
    st.lo = st.hi = days_[s].element_of(p.kappa);
    if (use_card_) {
      st.z.resize(periods_);
      for (Eigen::Index t = 0; t < periods_; ++t) st.z[t] = std::abs(p.x(t)) > kSnap ? 1 : 0;
    }
    return st;
  }

  // Objective of day s at a fixed shift profile, with kept shed re-chosen for d_bl.
  double evaluate_day(int s, DayPoint& p, const Vector& d_bl) const {
    const DayData& d = days_[s];
    const double tie = penalty_ * d.w;
    double obj = 0.0;
    for (Eigen::Index t = 0; t < periods_; ++t) {
      const double r = d_bl(t) + p.x(t) - d.y(t);
      const double e = d.w > 0.0 ? std::clamp(-r - tie / (2.0 * d.w), 0.0, d.U(t)) : 0.0;
      p.e(t) = e;
      obj += d.w * (r + e) * (r + e) + tie * (std::abs(p.x(t)) + e);
    }
    return obj;
  }

  // Lower bound for one day with the baseload fixed. Neutrality is priced by
  // lambda and the multiplier coupling is dropped, which leaves independent
  // hours; the shifting budget is then met exactly by keeping the best hours.
  double cardinality_bound(int s, const DayState& st, const Vector& d_bl) const {
    const DayData& d = days_[s];
    const double tie = penalty_ * d.w;
    const int budget =
        t_max_ - static_cast<int>(std::count(st.z.begin(), st.z.end(), std::int8_t{1}));
    if (budget < 0) return kInf;
    const auto T = periods_;
    Vector lo(T), hi(T), r(T), idle(T);
    double span = 1.0;
    for (Eigen::Index t = 0; t < T; ++t) {
      double peak_up = 0.0;
      double peak_dn = 0.0;
      if (st.z[t] != 0) {
        if (d.up[t].K > 0.0) hull(d.up[t], d, st.lo, st.hi, peak_up);
        if (d.dn[t].K > 0.0) hull(d.dn[t], d, st.lo, st.hi, peak_dn);
      }
      hi(t) = std::min(peak_up, d.up[t].K);
      lo(t) = -std::min(peak_dn, d.dn[t].K);
      r(t) = d_bl(t) - d.y(t);
      span = std::max(span, 2.0 * d.w * (std::abs(r(t)) + d.U(t) + hi(t) - lo(t)) + tie + 1.0);
    }
    auto phi = [&](Eigen::Index t, double x) {
      const double u = r(t) + x;
      const double e = d.w > 0.0 ? std::clamp(-u - tie / (2.0 * d.w), 0.0, d.U(t)) : 0.0;
      return d.w * (u + e) * (u + e) + tie * (e + std::abs(x));
    };
    for (Eigen::Index t = 0; t < T; ++t) idle(t) = phi(t, 0.0);

    std::vector<double> savings;
    auto dual = [&](double lambda) {
      double total = 0.0;
      savings.clear();
      for (Eigen::Index t = 0; t < T; ++t) {
        double best = idle(t);
        if (hi(t) > lo(t) && d.w > 0.0) {
          // The minimizer of a convex piecewise quadratic is a kink, an end
          // point or a stationary point of one piece.
          const double h = tie / (2.0 * d.w);
          for (double sign : {-1.0, 1.0}) {
            const double shift = (sign * tie + lambda) / (2.0 * d.w);
            for (double x : {-r(t) - shift, -r(t) - d.U(t) - shift, -h - r(t),
                             -d.U(t) - h - r(t), lo(t), hi(t)}) {
              x = std::clamp(x, lo(t), hi(t));
              best = std::min(best, phi(t, x) + lambda * x);
            }
          }
        }
        if (st.z[t] == 1) {
          total += best;
        } else {
          total += idle(t);
          if (st.z[t] == -1 && best < idle(t)) savings.push_back(best - idle(t));
        }
      }
      const auto keep = std::min<std::size_t>(savings.size(), static_cast<std::size_t>(budget));
      std::partial_sort(savings.begin(), savings.begin() + keep, savings.end());
      for (std::size_t i = 0; i < keep; ++i) total += savings[i];
      return total;
    };

    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = -span;
    double b = span;
    double x1 = b - golden * (b - a);
    double x2 = a + golden * (b - a);
    double f1 = dual(x1);
    double f2 = dual(x2);
    double best = std::max({dual(0.0), f1, f2});
    for (int it = 0; it < 80; ++it) {
      if (f1 < f2) {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + golden * (b - a);
        f2 = dual(x2);
      } else {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - golden * (b - a);
        f1 = dual(x1);
      }
      best = std::max({best, f1, f2});
    }
    return best - 1e-12 * (1.0 + std::abs(best));
  }

  NodeResult solve(const std::vector<int>& ids, const std::vector<DayState>& states,
                   const Vector* fixed_dbl) const {
    NodeResult res;
    QpBuilder qp;
    const auto T = periods_;
    std::vector<int> dbl(T, -1);
    if (!fixed_dbl) {
      for (Eigen::Index t = 0; t < T; ++t) dbl[t] = qp.add_variable(0.0, QpBuilder::kInf);
    }
    struct Vars {
      int kappa;
      std::vector<int> xp, xm, e, z;
    };
    std::vector<Vars> vars(ids.size());
    for (std::size_t j = 0; j < ids.size(); ++j) {
      const DayData& d = days_[ids[j]];
      const DayState& st = states[j];
      Vars& v = vars[j];
      const double left = d.range(st.lo).first;
      const double right = d.range(st.hi).second;
      v.kappa = qp.add_variable(left, right);
      int budget = t_max_;
      if (use_card_) {
        budget -= static_cast<int>(std::count(st.z.begin(), st.z.end(), std::int8_t{1}));
        if (budget < 0) return res;
      }
      std::vector<QpBuilder::Term> neutral, zsum;
      v.xp.resize(T);
      v.xm.resize(T);
      v.e.resize(T);
      v.z.assign(T, -1);
      for (Eigen::Index t = 0; t < T; ++t) {
        const bool allowed = !use_card_ || st.z[t] != 0;
        const Cap& cu = d.up[t];
        const Cap& cd = d.dn[t];
        const double ku = allowed ? cu.K : 0.0;
        const double kd = allowed ? cd.K : 0.0;
        v.xp[t] = qp.add_variable(0.0, ku);
        v.xm[t] = qp.add_variable(0.0, kd);
        v.e[t] = qp.add_variable(0.0, d.U(t));
        // Returns the largest value the shift can take at this node.
        auto add_caps = [&](const Cap& cap, int var, double k) {
          if (k <= 0.0) return 0.0;
          double peak = 0.0;
          double ub = k;
          for (const auto& seg : hull(cap, d, st.lo, st.hi, peak)) {
            if (seg.slope == 0.0) {
              ub = std::min(ub, seg.intercept);
            } else {
              qp.add_inequality({{var, 1.0}, {v.kappa, -seg.slope}}, seg.intercept);
            }
          }
          ub = std::max(std::min(ub, peak), 0.0);
          qp.set_bounds(var, 0.0, ub);
          return ub;
        };
        const double mu = add_caps(cu, v.xp[t], ku);
        const double md = add_caps(cd, v.xm[t], kd);
        if (use_card_ && st.z[t] == -1 && (mu > 0.0 || md > 0.0)) {
          v.z[t] = qp.add_variable(0.0, 1.0);
          if (mu > 0.0) qp.add_inequality({{v.xp[t], 1.0}, {v.z[t], -mu}}, 0.0);
          if (md > 0.0) qp.add_inequality({{v.xm[t], 1.0}, {v.z[t], -md}}, 0.0);
          zsum.emplace_back(v.z[t], 1.0);
        }
        neutral.emplace_back(v.xp[t], 1.0);
        neutral.emplace_back(v.xm[t], -1.0);
        std::vector<QpBuilder::Term> fit_terms{{v.xp[t], 1.0}, {v.xm[t], -1.0}, {v.e[t], 1.0}};
        double offset = -d.y(t);
        if (fixed_dbl) {
          offset += (*fixed_dbl)(t);
        } else {
          fit_terms.emplace_back(dbl[t], 1.0);
        }
        qp.add_squared(fit_terms, offset, d.w);
        const double tie = penalty_ * d.w;
        qp.add_linear(v.xp[t], tie);
        qp.add_linear(v.xm[t], tie);
        qp.add_linear(v.e[t], tie);
      }
      qp.add_equality(neutral, 0.0);
      if (!zsum.empty() && static_cast<int>(zsum.size()) > budget) {
        qp.add_inequality(zsum, budget);
      }
    }

    const QpResult r = qp.solve();
    if (r.status != QpStatus::kOptimal || !r.x.allFinite()) return res;
    res.ok = true;
    res.obj = r.objective;
    res.d_bl = fixed_dbl ? *fixed_dbl : Vector(T);
    if (!fixed_dbl) {
      for (Eigen::Index t = 0; t < T; ++t) res.d_bl(t) = std::max(r.x(dbl[t]), 0.0);
    }
    res.days.resize(ids.size());
    for (std::size_t j = 0; j < ids.size(); ++j) {
      const Vars& v = vars[j];
      DayPoint& p = res.days[j];
      p.x.resize(T);
      p.e.resize(T);
      p.z = Vector::Zero(T);
      for (Eigen::Index t = 0; t < T; ++t) {
        p.x(t) = r.x(v.xp[t]) - r.x(v.xm[t]);
        p.e(t) = std::max(r.x(v.e[t]), 0.0);
        if (v.z[t] >= 0) p.z(t) = r.x(v.z[t]);
      }
      p.kappa = r.x(v.kappa);
    }
    return res;
  }

 private:
  std::vector<DayData> days_;
  Eigen::Index periods_ = 0;
  int t_max_ = 0;
  double penalty_ = 0.0;
  bool use_card_ = false;
};

struct BnbOutcome {
  std::optional<Candidate> best;
  long nodes = 0;
  bool complete = true;
};

// Best-first branch-and-bound over multiplier ranges and shifted-hour indicators.
BnbOutcome branch_and_bound(const Problem& pb, const std::vector<int>& ids,
                            std::vector<DayState> roots, const Vector* fixed_dbl, std::optional<Candidate> incumbent,
                            long max_nodes, double tol) {
  struct Node {
    double bound;
    long order;
    std::vector<DayState> states;
  };
  auto worse = [](const Node& a, const Node& b) {
    return a.bound != b.bound ? a.bound > b.bound : a.order > b.order;
  };
  std::priority_queue<Node, std::vector<Node>, decltype(worse)> open(worse);
  long order = 0;
  Node root{-kInf, order++, std::move(roots)};
  open.push(std::move(root));

  BnbOutcome out;
  out.best = std::move(incumbent);
  auto cutoff = [&] {
    return out.best ? out.best->obj - tol * (1.0 + std::abs(out.best->obj)) : kInf;
  };

  while (!open.empty()) {
    Node node = open.top();
    open.pop();
    if (node.bound >= cutoff()) continue;
    if (out.nodes >= max_nodes) {
      out.complete = false;
      break;
    }
    ++out.nodes;
    if (fixed_dbl && ids.size() == 1 && pb.use_card() &&
        pb.cardinality_bound(ids[0], node.states[0], *fixed_dbl) >= cutoff()) {
      continue;
    }
    NodeResult res = pb.solve(ids, node.states, fixed_dbl);
    if (!res.ok || res.obj >= cutoff()) continue;

    int kappa_day = -1;
    double kappa_worst = 0.0;
    int card_day = -1;
    int card_worst = 0;
    for (std::size_t j = 0; j < ids.size(); ++j) {
      const DayData& d = pb.day(ids[j]);
      const KappaCheck chk = check_day(d, res.days[j].x);
      res.days[j].kappa = chk.kappa;
      const DayState& st = node.states[j];
      if (chk.violation > kKappaTol && st.hi > st.lo && chk.violation > kappa_worst) {
        kappa_worst = chk.violation;
        kappa_day = static_cast<int>(j);
      }
      const int excess = chk.active - pb.t_max();
      if (excess > 0 && excess > card_worst) {
        card_worst = excess;
        card_day = static_cast<int>(j);
      }
    }

    if (kappa_day < 0 && card_day < 0) {
      out.best = Candidate{res.obj, res.d_bl, std::move(res.days)};
      continue;
    }
    if (kappa_day >= 0 && card_day < 0) {
      const DayState& st = node.states[kappa_day];
      const int mid = st.lo + (st.hi - st.lo) / 2;
      Node left{res.obj, order++, node.states};
      left.states[kappa_day].hi = mid;
      Node right{res.obj, order++, node.states};
      right.states[kappa_day].lo = mid + 1;
      open.push(std::move(left));
      open.push(std::move(right));
      continue;
    }
    // Cardinality: branch on the most fractional free indicator of a shifted hour.
    const DayPoint& p = res.days[card_day];
    const DayState& st = node.states[card_day];
    Eigen::Index hour = -1;
    double best_frac = -1.0;
    for (Eigen::Index t = 0; t < pb.periods(); ++t) {
      if (st.z[t] != -1 || std::abs(p.x(t)) <= kSnap) continue;
      const double frac = 0.5 - std::abs(p.z(t) - 0.5);
      if (frac > best_frac) {
        best_frac = frac;
        hour = t;
      }
    }
    if (hour < 0) continue;
    for (std::int8_t v : {std::int8_t{0}, std::int8_t{1}}) {
      Node child{res.obj, order++, node.states};
      child.states[card_day].z[hour] = v;
      open.push(std::move(child));
    }
  }
  return out;
}

// Re-solves with every day pinned to its element and active hours.
std::optional<Candidate> polish(const Problem& pb, const Candidate& cand, bool fix_dbl) {
  std::vector<int> ids(pb.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::vector<DayState> states;
  for (int s = 0; s < pb.size(); ++s) states.push_back(pb.pinned_state(s, cand.days[s]));
  NodeResult res = pb.solve(ids, states, fix_dbl ? &cand.d_bl : nullptr);
  if (!res.ok) return std::nullopt;
  for (int s = 0; s < pb.size(); ++s) {
    const KappaCheck chk = check_day(pb.day(s), res.days[s].x);
    if (chk.violation > kKappaTol || chk.active > pb.t_max()) return std::nullopt;
    res.days[s].kappa = chk.kappa;
  }
  return Candidate{res.obj, std::move(res.d_bl), std::move(res.days)};
}

// Feasible start for one day with the baseload fixed: no shifting at all, or
// the root relaxation rounded to its t_max largest shifts.
std::optional<Candidate> day_incumbent(const Problem& pb, int s, const Vector& d_bl, long max_nodes,
                                       double tol, long& nodes) {
  const auto T = pb.periods();
  DayPoint idle;
  idle.x = Vector::Zero(T);
  idle.e = Vector::Zero(T);
  idle.z = Vector::Zero(T);
  idle.kappa = pb.day(s).clamp_kappa(0.0);
  const double idle_obj = pb.evaluate_day(s, idle, d_bl);
  std::optional<Candidate> best = Candidate{idle_obj, d_bl, {std::move(idle)}};
  if (!pb.use_card()) return best;

  const DayState root = pb.root_state(s);
  const NodeResult res = pb.solve({s}, {root}, &d_bl);
  if (!res.ok) return best;
  const Vector& x = res.days.front().x;
  std::vector<Eigen::Index> order(T);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return std::abs(x(a)) > std::abs(x(b)); });
  DayState st = root;
  std::fill(st.z.begin(), st.z.end(), std::int8_t{0});
  for (int i = 0; i < pb.t_max() && i < T; ++i) {
    if (std::abs(x(order[i])) > kSnap) st.z[order[i]] = 1;
  }
  BnbOutcome out = branch_and_bound(pb, {s}, {st}, &d_bl, std::move(best), max_nodes, tol);
  nodes += out.nodes + 1;
  return std::move(out.best);
}

// Each day's decisions with the baseload held fixed. The previous iterate, if
// any, seeds every day's search as its incumbent.
std::optional<Candidate> solve_days_given_baseload(const Problem& pb, const Vector& d_bl,
                                                   const Candidate* previous, long max_nodes,
                                                   double tol, int threads, long& nodes,
                                                   bool& complete) {
  const int S = pb.size();
  std::vector<BnbOutcome> per(S);
  parallel_for(
      static_cast<std::size_t>(S),
      [&](std::size_t i) {
        const int s = static_cast<int>(i);
        long dive = 0;
        std::optional<Candidate> seed = day_incumbent(pb, s, d_bl, max_nodes, tol, dive);
        if (previous) {
          DayPoint p = previous->days[s];
          const double obj = pb.evaluate_day(s, p, d_bl);
          if (!seed || obj < seed->obj) seed = Candidate{obj, d_bl, {std::move(p)}};
        }
        per[s] = branch_and_bound(pb, {s}, {pb.root_state(s)}, &d_bl, std::move(seed), max_nodes, tol);
        per[s].nodes += dive;
      },
      threads);
  Candidate c;
  c.obj = 0.0;
  c.d_bl = d_bl;
  for (int s = 0; s < S; ++s) {
    nodes += per[s].nodes;
    complete = complete && per[s].complete;
    if (!per[s].best) return std::nullopt;
    c.obj += per[s].best->obj;
    c.days.push_back(std::move(per[s].best->days.front()));
  }
  return c;
}

// Larger neighbourhood than the coordinate steps: one day's decisions are
// searched jointly with the baseload while the other days keep their
// multiplier element and shifted hours.
bool refine_days(const Problem& pb, Candidate& cand, long max_nodes, double tol, long& nodes) {
  std::vector<int> ids(pb.size());
  std::iota(ids.begin(), ids.end(), 0);
  bool improved = false;
  for (int s = 0; s < pb.size(); ++s) {
    std::vector<DayState> roots;
    for (int j = 0; j < pb.size(); ++j) {
      roots.push_back(j == s ? pb.root_state(j) : pb.pinned_state(j, cand.days[j]));
    }
    const double before = cand.obj;
    BnbOutcome out = branch_and_bound(pb, ids, std::move(roots), nullptr, cand, max_nodes, tol);
    nodes += out.nodes;
    if (out.best && out.best->obj < before - tol * (1.0 + std::abs(before))) {
      cand = std::move(*out.best);
      improved = true;
    }
  }
  return improved;
}

struct AlternatingOutcome {
  Candidate best;
  int iterations = 0;
  long nodes = 0;
  bool converged = false;
};

AlternatingOutcome alternate(const Problem& pb, const Vector& start, const FitConfig& cfg,
                             bool wide) {
  AlternatingOutcome out;
  Vector d_bl = start;
  std::optional<Candidate> best;
  bool complete = true;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    out.iterations = it;
    auto step_a = solve_days_given_baseload(pb, d_bl, best ? &*best : nullptr,
                                            std::min(cfg.day_nodes, cfg.max_nodes), cfg.tol_obj,
                                            cfg.threads, out.nodes, complete);
    if (!step_a) break;
    std::optional<Candidate> step_b = polish(pb, *step_a, false);
    Candidate next = step_b && step_b->obj <= step_a->obj ? std::move(*step_b) : std::move(*step_a);
    const bool stalled =
        best && best->obj - next.obj <= cfg.tol_obj * (1.0 + std::abs(best->obj));
    if (!best || next.obj < best->obj) best = next;
    if (stalled && wide && refine_days(pb, *best, cfg.max_nodes, cfg.tol_obj, out.nodes)) {
      d_bl = best->d_bl;
      continue;
    }
    d_bl = best->d_bl;
    if (stalled) {
      out.converged = complete;
      break;
    }
  }
  if (!best) throw InvalidInput("fit: no feasible iterate found");
  out.best = std::move(*best);
  return out;
}

// Per-column weighted quantile: the smallest value whose cumulative weight
// reaches `level` of the total.
Vector weighted_quantile(const Matrix& rows, const Vector& weights, double level) {
  if (rows.rows() != weights.size() || rows.rows() == 0) {
    throw InvalidInput("median: one weight per row required");
  }
  Vector out(rows.cols());
  std::vector<Eigen::Index> idx(rows.rows());
  const double target = level * weights.sum();
  for (Eigen::Index t = 0; t < rows.cols(); ++t) {
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return rows(a, t) < rows(b, t); });
    double acc = 0.0;
    out(t) = rows(idx.back(), t);
    for (Eigen::Index i : idx) {
      acc += weights(i);
      if (acc >= target) {
        out(t) = rows(i, t);
        break;
      }
    }
  }
  return out;
}

void check_inputs(const std::vector<DaySample>& train, const std::vector<FlexBounds>& bounds,
                  const std::vector<PriceSignal>& prices, const std::vector<ComfortCosts>& costs,
                  const FitConfig& cfg) {
  if (train.empty()) throw InvalidInput("fit: no training days");
  const auto S = train.size();
  if (bounds.size() != S || prices.size() != S || costs.size() != S) {
    throw InvalidInput("fit: bounds, prices and costs need one entry per training day");
  }
  const auto T = train.front().periods();
  const auto F = train.front().features.cols();
  for (std::size_t s = 0; s < S; ++s) {
    const std::string where = "fit: day " + std::to_string(s) + ": ";
    try {
      train[s].validate();
      if (train[s].periods() != T || train[s].features.cols() != F) {
        throw InvalidInput("shape differs from day 0");
      }
      bounds[s].validate(T);
      prices[s].validate(T);
      costs[s].validate(T);
    } catch (const InvalidInput& e) {
      throw InvalidInput(where + e.what());
    }
  }
  cfg.validate(static_cast<int>(T));
}

DayData make_day(const DaySample& day, const FlexBounds& k, const PriceSignal& z,
                 const ComfortCosts& c, double weight) {
  DayData d;
  const auto T = day.periods();
  d.w = weight;
  d.y = day.demand + day.gen;
  d.U.resize(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    d.up.push_back({z.sf_plus(t) - z.p(t), c.sf_plus(t), k.sf_plus(t), true});
    d.dn.push_back({z.sf_minus(t) + z.p(t), c.sf_minus(t), k.sf_minus(t), false});
    d.up.back().breakpoints(d.bps);
    d.dn.back().breakpoints(d.bps);
    const double a = z.sd(t) + z.p(t);
    if (c.sd(t) > 0.0) {
      d.U(t) = std::max(k.sd(t) - std::max(a / (2.0 * c.sd(t)), 0.0), 0.0);
    } else {
      d.U(t) = a > 0.0 ? 0.0 : k.sd(t);
    }
  }
  std::sort(d.bps.begin(), d.bps.end());
  d.bps.erase(std::unique(d.bps.begin(), d.bps.end()), d.bps.end());
  return d;
}

// Turns a relaxation point into an exact consumer decision and its envelopes.
FopSolution recover_day(const DayData& d, const DayPoint& p, const Vector& d_bl,
                        const DaySample& day, const PriceSignal& z, const ComfortCosts& c,
                        DemandAttributes& attrs) {
  const auto T = d.periods();
  Vector up = Vector::Zero(T);
  Vector dn = Vector::Zero(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    if (p.x(t) > kSnap) up(t) = std::min(p.x(t), d.up[t].K);
    if (p.x(t) < -kSnap) dn(t) = std::min(-p.x(t), d.dn[t].K);
  }
  // Restore exact neutrality on the largest shift of the heavier side.
  const double imbalance = up.sum() - dn.sum();
  if (up.sum() == 0.0 || dn.sum() == 0.0) {
    up.setZero();
    dn.setZero();
  } else if (imbalance > 0.0) {
    Eigen::Index i;
    up.maxCoeff(&i);
    up(i) = std::max(up(i) - imbalance, 0.0);
  } else if (imbalance < 0.0) {
    Eigen::Index i;
    dn.maxCoeff(&i);
    dn(i) = std::max(dn(i) + imbalance, 0.0);
  }

  attrs.d_bl = d_bl;
  attrs.env_sf_plus = up;
  attrs.env_sf_minus = dn;
  attrs.env_sd = Vector::Zero(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    if (p.e(t) <= kSnap) continue;
    const double kept = std::min(p.e(t), d.U(t));
    const double shed = c.sd(t) > 0.0 ? std::max((z.sd(t) + z.p(t)) / (2.0 * c.sd(t)), 0.0) : 0.0;
    attrs.env_sd(t) = kept + shed;
  }

  FlexDecision theta;
  theta.d_sf_plus = up;
  theta.d_sf_minus = dn;
  theta.d_sd_minus = solve_shed(z, c, attrs.env_sd);
  theta.delta_plus = (up.array() > 0.0).cast<std::uint8_t>();
  theta.delta_minus = (dn.array() > 0.0).cast<std::uint8_t>();
  const double kappa = check_day(d, up - dn).kappa;
  return make_fop_solution(std::move(theta), kappa, z, c, attrs, day.gen);
}

}  // namespace

const char* to_string(SolverMode mode) {
  return mode == SolverMode::kExact ? "exact" : "alternating";
}

SolverMode parse_solver_mode(const std::string& text) {
  if (text == "exact" || text == "exact_bnb") return SolverMode::kExact;
  if (text == "alternating") return SolverMode::kAlternating;
  throw InvalidInput("unknown solver mode '" + text + "' (expected exact or alternating)");
}

void FitConfig::validate(int periods) const {
  hyper.validate(periods);
  if (max_iters < 1) throw InvalidInput("fit: max_iters must be >= 1");
  if (!(tol_obj > 0.0) || !(tol_kkt > 0.0)) throw InvalidInput("fit: tolerances must be > 0");
  if (!(ridge >= 0.0)) throw InvalidInput("fit: ridge must be >= 0");
  if (max_nodes < 1) throw InvalidInput("fit: max_nodes must be >= 1");
  if (day_nodes < 1) throw InvalidInput("fit: day_nodes must be >= 1");
}

Vector weighted_median(const Matrix& rows, const Vector& weights) {
  return weighted_quantile(rows, weights, 0.5);
}

FitResult fit(const std::vector<DaySample>& train, const std::vector<FlexBounds>& bounds,
              const std::vector<PriceSignal>& prices, const std::vector<ComfortCosts>& costs,
              const FitConfig& config) {
  check_inputs(train, bounds, prices, costs, config);
  const int S = static_cast<int>(train.size());
  const auto T = train.front().periods();
  const Vector weights = compute_weights(config.hyper.alpha, S);

  std::vector<DayData> days;
  double scale = 0.0;
  for (int s = 0; s < S; ++s) {
    days.push_back(make_day(train[s], bounds[s], prices[s], costs[s], weights(s)));
    scale = std::max(scale, days.back().y.cwiseAbs().maxCoeff());
  }
  // Tiny linear cost on flexibility: among equally good fits, prefer the one
  // explaining the most demand as baseload.
  const Problem pb(std::move(days), config.hyper.t_max, 1e-9 * (1.0 + scale));

  Matrix y(S, T);
  for (int s = 0; s < S; ++s) y.row(s) = pb.day(s).y.transpose();
  // The weighted median start comes first; the others only replace it when
  // they end strictly lower.
  // Extra starts and the joint day search only pay off at desk scale.
  const bool wide = static_cast<long>(S) * T <= kDeskCells;
  std::vector<Vector> starts{weighted_median(y, weights)};
  if (wide) {
    for (double level : {0.25, 0.75, 0.0, 1.0}) starts.push_back(weighted_quantile(y, weights, level));
    starts.push_back(y.transpose() * weights);
  }

  FitResult result;
  std::optional<AlternatingOutcome> alt;
  for (const Vector& start : starts) {
    AlternatingOutcome run = alternate(pb, start.cwiseMax(0.0), config, wide);
    result.iterations += run.iterations;
    result.nodes += run.nodes;
    if (!alt || run.best.obj < alt->best.obj - config.tol_obj * (1.0 + std::abs(alt->best.obj))) {
      alt = std::move(run);
    }
  }
  Candidate best = std::move(alt->best);
  result.converged = alt->converged;

  if (config.solver_mode == SolverMode::kExact) {
    std::vector<int> ids(S);
    std::iota(ids.begin(), ids.end(), 0);
    std::vector<DayState> roots;
    for (int s : ids) roots.push_back(pb.root_state(s));
    BnbOutcome ex = branch_and_bound(pb, ids, std::move(roots), nullptr, best, config.max_nodes, config.tol_obj);
    result.nodes += ex.nodes;
    result.converged = ex.complete;
    if (ex.best) best = std::move(*ex.best);
    if (auto pol = polish(pb, best, false); pol && pol->obj <= best.obj) best = std::move(*pol);
  }

  result.solver_mode = config.solver_mode;
  result.hyper = config.hyper;
  result.weights = weights;
  result.d_bl = best.d_bl;
  for (int s = 0; s < S; ++s) {
    DemandAttributes attrs;
    result.per_day.push_back(recover_day(pb.day(s), best.days[s], best.d_bl, train[s], prices[s],
                                         costs[s], attrs));
    result.kkt_max_residual = std::max(
        result.kkt_max_residual, kkt_residual(result.per_day.back(), prices[s], costs[s], attrs));
    result.attributes.push_back(std::move(attrs));
  }
  result.training_loss = reconstruction_loss(result, train, weights);

  const auto& h = config.hyper;
  refit_envelope_rules(result, train, {h.gamma_sf_plus, h.gamma_sf_minus, h.gamma_sd}, config.scaling,
                       config.ridge);
  return result;
}

void refit_envelope_rules(FitResult& result, const std::vector<DaySample>& train,
                          const std::array<double, 3>& gammas, FeatureScaling scaling, double ridge) {
  const auto S = static_cast<Eigen::Index>(train.size());
  if (result.attributes.size() != train.size() || S == 0) {
    throw InvalidInput("kernel rules: fit and data disagree on the number of days");
  }
  const Eigen::Index T = result.d_bl.size();
  std::array<Matrix, 3> targets{Matrix(S, T), Matrix(S, T), Matrix(S, T)};
  std::vector<Matrix> features;
  for (Eigen::Index s = 0; s < S; ++s) {
    const auto& attrs = result.attributes[static_cast<std::size_t>(s)];
    targets[0].row(s) = attrs.env_sf_plus.transpose();
    targets[1].row(s) = attrs.env_sf_minus.transpose();
    targets[2].row(s) = attrs.env_sd.transpose();
    features.push_back(train[static_cast<std::size_t>(s)].features);
  }
  result.hyper.gamma_sf_plus = gammas[0];
  result.hyper.gamma_sf_minus = gammas[1];
  result.hyper.gamma_sd = gammas[2];
  result.envelope_model = KernelEnvelopeModel::create(features, gammas, scaling);
  result.rule_residual = fit_coefficients(result.envelope_model, targets, ridge).max_residual;
}

double reconstruction_loss(const FitResult& result, const std::vector<DaySample>& train,
                           const Vector& weights) {
  if (result.per_day.size() != train.size() || weights.size() != static_cast<Eigen::Index>(train.size())) {
    throw InvalidInput("loss: result, data and weights disagree on the number of days");
  }
  double loss = 0.0;
  for (std::size_t s = 0; s < train.size(); ++s) {
    const auto& sol = result.per_day[s];
    check_length(sol.d_sf, train[s].periods(), "loss: d_sf");
    const Vector r = result.d_bl + sol.d_sf + sol.d_sd - train[s].gen - train[s].demand;
    loss += weights(static_cast<Eigen::Index>(s)) * r.squaredNorm();
  }
  return loss;
}

FitReport verify_fit(const FitResult& result, const std::vector<PriceSignal>& prices,
                     const std::vector<ComfortCosts>& costs,
                     const std::vector<FlexBounds>& bounds, int t_max, double tol_kkt) {
  const auto S = result.per_day.size();
  if (prices.size() != S || costs.size() != S || bounds.size() != S ||
      result.attributes.size() != S) {
    throw InvalidInput("verify: inputs need one entry per fitted day");
  }
  FitReport report;
  for (std::size_t s = 0; s < S; ++s) {
    const auto& sol = result.per_day[s];
    const auto& a = result.attributes[s];
    const auto& k = bounds[s];
    DayCheck c;
    c.kkt_residual = kkt_residual(sol, prices[s], costs[s], a);
    const auto& th = sol.theta;
    int active = 0;
    bool ok = std::abs(th.d_sf_plus.sum() - th.d_sf_minus.sum()) <= tol_kkt;
    for (Eigen::Index t = 0; t < th.size(); ++t) {
      active += th.delta_plus(t) + th.delta_minus(t);
      ok = ok && th.delta_plus(t) + th.delta_minus(t) <= 1;
      ok = ok && th.d_sf_plus(t) >= 0.0 && th.d_sf_minus(t) >= 0.0 && th.d_sd_minus(t) >= 0.0;
      ok = ok && th.d_sf_plus(t) <= a.env_sf_plus(t) * th.delta_plus(t) + tol_kkt;
      ok = ok && th.d_sf_minus(t) <= a.env_sf_minus(t) * th.delta_minus(t) + tol_kkt;
      ok = ok && th.d_sd_minus(t) <= a.env_sd(t) + tol_kkt;
    }
    c.in_feasible_set = ok && active <= t_max;
    c.envelopes_in_bounds =
        (a.env_sf_plus.array() >= 0.0).all() && (a.env_sf_minus.array() >= 0.0).all() &&
        (a.env_sd.array() >= 0.0).all() && (a.env_sf_plus.array() <= k.sf_plus.array()).all() &&
        (a.env_sf_minus.array() <= k.sf_minus.array()).all() &&
        (a.env_sd.array() <= k.sd.array()).all();
    const Vector gen = Vector::Zero(th.size());
    const FopSolution best = solve_fop(prices[s], costs[s], a, t_max, gen);
    c.fop_gap = std::max(best.utility - consumer_utility(th, prices[s], costs[s], a, gen), 0.0);
    report.max_kkt_residual = std::max(report.max_kkt_residual, c.kkt_residual);
    report.max_fop_gap = std::max(report.max_fop_gap, c.fop_gap);
    report.all_feasible = report.all_feasible && c.in_feasible_set;
    report.all_in_bounds = report.all_in_bounds && c.envelopes_in_bounds;
    report.days.push_back(c);
  }
  report.passed = report.all_feasible && report.all_in_bounds && report.max_kkt_residual <= tol_kkt;
  return report;
}

}  // namespace flexio
