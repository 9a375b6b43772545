#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "flexio/fop.hpp"
#include "flexio/model.hpp"

namespace flexio::testing {

struct Instance {
  PriceSignal prices;
  ComfortCosts costs;
  DemandAttributes attrs;
  Vector gen;
  int t_max = 0;
};

inline Vector uniform_vector(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Random day. Half of the draws come from a TOU tariff (zero costs in the
// incentive direction), the rest have generic positive costs and prices,
// with some costs zeroed to exercise the bang-bang branch.
inline Instance random_instance(std::mt19937_64& rng, Eigen::Index n, double max_env = 2.0) {
  Instance in;
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> tmax(0, static_cast<int>(n));
  if (coin(rng)) {
    std::uniform_real_distribution<double> price(10.0, 40.0);
    const double flat = price(rng);
    Vector tou(n);
    for (auto& x : tou) x = price(rng);
    in.prices = build_tou_prices(flat, tou);
    in.costs = build_comfort_costs(in.prices, flat, tou);
  } else {
    in.prices.p = uniform_vector(rng, n, 0.0, 10.0);
    in.prices.sf_plus = uniform_vector(rng, n, 0.0, 4.0);
    in.prices.sf_minus = uniform_vector(rng, n, 0.0, 4.0);
    in.prices.sd = uniform_vector(rng, n, 0.0, 4.0);
    in.costs.sf_plus = uniform_vector(rng, n, 0.0, 5.0);
    in.costs.sf_minus = uniform_vector(rng, n, 0.0, 5.0);
    in.costs.sd = uniform_vector(rng, n, 0.0, 5.0);
    for (Eigen::Index t = 0; t < n; ++t) {
      if (coin(rng) && coin(rng)) in.costs.sf_plus(t) = 0.0;
      if (coin(rng) && coin(rng)) in.costs.sf_minus(t) = 0.0;
    }
  }
  in.attrs.d_bl = uniform_vector(rng, n, 0.0, 3.0);
  in.attrs.env_sf_plus = uniform_vector(rng, n, 0.0, max_env);
  in.attrs.env_sf_minus = uniform_vector(rng, n, 0.0, max_env);
  in.attrs.env_sd = uniform_vector(rng, n, 0.0, max_env);
  in.gen = uniform_vector(rng, n, 0.0, 1.0);
  in.t_max = tmax(rng);
  return in;
}

// max_{0 <= d <= cap} a d - c d^2
inline double best_response_value(double a, double c, double cap) {
  if (cap <= 0.0) return 0.0;
  if (c > 0.0) {
    const double d = std::clamp(a / (2.0 * c), 0.0, cap);
    return a * d - c * d * d;
  }
  return std::max(a, 0.0) * cap;
}

// Ternary search for the minimum of a convex function on [lo, hi].
inline double minimize_convex(const std::function<double(double)>& f, double lo, double hi) {
  for (int it = 0; it < 300; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (f(m1) <= f(m2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  return f(0.5 * (lo + hi));
}

// Optimal consumer utility by enumerating every direction pattern and solving
// each pattern's concave shift problem through its (exact) Lagrangian dual.
inline double brute_force_utility(const Instance& in) {
  const auto n = in.prices.size();
  const auto& z = in.prices;
  const auto& c = in.costs;
  const auto& a = in.attrs;
  double shed = 0.0;
  double base = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) {
    shed += best_response_value(z.sd(t) + z.p(t), c.sd(t), a.env_sd(t));
    base -= z.p(t) * (a.d_bl(t) + a.env_sd(t) - in.gen(t));
  }
  const double span = 10.0 + 2.0 * (z.p.maxCoeff() + z.sf_plus.maxCoeff() + z.sf_minus.maxCoeff()) +
                      4.0 * (c.sf_plus.maxCoeff() + c.sf_minus.maxCoeff()) *
                          (a.env_sf_plus.maxCoeff() + a.env_sf_minus.maxCoeff() + 1.0);
  double best = 0.0;
  std::vector<int> pattern(n, 0);
  while (true) {
    int active = 0;
    for (int v : pattern) active += v != 0;
    if (active <= in.t_max && active > 0) {
      auto dual = [&](double kappa) {
        double v = 0.0;
        for (Eigen::Index t = 0; t < n; ++t) {
          if (pattern[t] == 1) {
            v += best_response_value(z.sf_plus(t) - z.p(t) + kappa, c.sf_plus(t), a.env_sf_plus(t));
          } else if (pattern[t] == 2) {
            v += best_response_value(z.sf_minus(t) + z.p(t) - kappa, c.sf_minus(t),
                                     a.env_sf_minus(t));
          }
        }
        return v;
      };
      best = std::max(best, minimize_convex(dual, -span, span));
    }
    Eigen::Index i = 0;
    while (i < n && pattern[i] == 2) pattern[i++] = 0;
    if (i == n) break;
    ++pattern[i];
  }
  return base + shed + best;
}

inline bool in_feasible_set(const FlexDecision& th, const DemandAttributes& attrs, int t_max,
                            double tol) {
  const auto n = th.size();
  int active = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (th.delta_plus(t) + th.delta_minus(t) > 1) return false;
    active += th.delta_plus(t) + th.delta_minus(t);
    if (th.d_sf_plus(t) < -tol || th.d_sf_plus(t) > attrs.env_sf_plus(t) * th.delta_plus(t) + tol)
      return false;
    if (th.d_sf_minus(t) < -tol ||
        th.d_sf_minus(t) > attrs.env_sf_minus(t) * th.delta_minus(t) + tol)
      return false;
    if (th.d_sd_minus(t) < -tol || th.d_sd_minus(t) > attrs.env_sd(t) + tol) return false;
  }
  return active <= t_max && std::abs(th.d_sf_plus.sum() - th.d_sf_minus.sum()) <= tol;
}

}  // namespace flexio::testing

namespace flexio::testing {

// Days generated by the consumer model itself, optionally with additive noise.
struct FitProblem {
  std::vector<DaySample> days;
  std::vector<FlexBounds> bounds;
  std::vector<PriceSignal> prices;
  std::vector<ComfortCosts> costs;
  std::vector<DemandAttributes> truth;
  std::vector<FopSolution> truth_decisions;
  int t_max = 0;
};

inline FitProblem make_fit_problem(std::mt19937_64& rng, int days, Eigen::Index periods,
                                   int t_max, double noise = 0.0) {
  FitProblem fp;
  fp.t_max = t_max;
  std::normal_distribution<double> eps(0.0, 1.0);
  std::uniform_real_distribution<double> price(10.0, 40.0);
  const Vector d_bl = uniform_vector(rng, periods, 2.0, 5.0);
  for (int s = 0; s < days; ++s) {
    const double flat = 25.0;
    Vector tou(periods);
    for (auto& x : tou) x = price(rng);
    PriceSignal z = build_tou_prices(flat, tou);
    ComfortCosts c = build_comfort_costs(z, flat, tou);
    DemandAttributes a;
    a.d_bl = d_bl;
    a.env_sf_plus = uniform_vector(rng, periods, 0.0, 1.5);
    a.env_sf_minus = uniform_vector(rng, periods, 0.0, 1.5);
    a.env_sd = uniform_vector(rng, periods, 0.0, 0.5);
    DaySample day;
    day.gen = uniform_vector(rng, periods, 0.0, 1.0);
    day.features = Matrix(periods, 3);
    for (Eigen::Index t = 0; t < periods; ++t) {
      day.features.row(t) << eps(rng), std::sin(0.3 * t + s), std::cos(0.3 * t + s);
    }
    day.day_index = s;
    FopSolution sol = solve_fop(z, c, a, t_max, day.gen);
    day.demand = a.d_bl + sol.d_sf + sol.d_sd - day.gen;
    for (auto& x : day.demand) x += noise * eps(rng);
    FlexBounds k;
    k.sf_plus = k.sf_minus = k.sd = Vector::Constant(periods, 2.0);
    fp.days.push_back(std::move(day));
    fp.bounds.push_back(std::move(k));
    fp.prices.push_back(std::move(z));
    fp.costs.push_back(std::move(c));
    fp.truth.push_back(std::move(a));
    fp.truth_decisions.push_back(std::move(sol));
  }
  return fp;
}

}  // namespace flexio::testing
