#include "flexio/synthetic.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

#include "flexio/fop.hpp"
#include "flexio/model.hpp"

namespace flexio {
namespace {

std::string add_days(const std::string& start, int offset) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  char a = 0;
  char b = 0;
  std::istringstream in(start);
  in >> y >> a >> m >> b >> d;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!in || a != '-' || b != '-' || !ymd.ok()) {
    throw InvalidInput("synthetic: invalid start date '" + start + "'");
  }
  const std::chrono::year_month_day out{std::chrono::sys_days{ymd} + std::chrono::days{offset}};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(out.year()),
                static_cast<unsigned>(out.month()), static_cast<unsigned>(out.day()));
  return buf;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (periods < 1 || days < 1) throw InvalidInput("synthetic: periods and days must be >= 1");
  if (d_bl.size() != 0) {
    check_length(d_bl, periods, "synthetic: d_bl");
    check_nonnegative(d_bl, "synthetic: d_bl");
  }
  if (!(base_load >= 0.0)) throw InvalidInput("synthetic: base_load < 0");
  for (double e : envelope) {
    if (!(e >= 0.0) && rule == EnvelopeRuleKind::kConstant) {
      throw InvalidInput("synthetic: envelope levels must be >= 0");
    }
  }
  for (double g : gamma) {
    if (!(g > 0.0)) throw InvalidInput("synthetic: gamma must be > 0");
  }
  if (!(noise_sigma >= 0.0)) throw InvalidInput("synthetic: noise_sigma must be >= 0");
  if (!(tou_jitter >= 0.0) || !(kernel_scale >= 0.0) || !(gen_peak >= 0.0)) {
    throw InvalidInput("synthetic: jitter, kernel scale and generation peak must be >= 0");
  }
  if (!(peak_price >= 0.0) || !(offpeak_price >= 0.0)) {
    throw InvalidInput("synthetic: TOU prices must be >= 0");
  }
  if (t_max < 0 || t_max > periods) throw InvalidInput("synthetic: t_max outside [0, T]");
  if (anchor_days < 0 || anchor_days > days) throw InvalidInput("synthetic: anchor_days outside [0, days]");
}

TariffSpec SyntheticSpec::tariff() const {
  TariffSpec t;
  t.flat = flat_price;
  t.tou = tou_schedule(periods, peak_price, offpeak_price, peak_windows);
  t.shed_rule = shed_rule;
  t.shed_cost = shed_cost;
  return t;
}

Vector default_baseload(int periods, double scale) {
  Vector v(periods);
  for (int t = 0; t < periods; ++t) {
    const double h = 24.0 * t / periods;
    v(t) = scale * (0.6 + 0.35 * std::exp(-(h - 8.0) * (h - 8.0) / 8.0) +
                    0.6 * std::exp(-(h - 19.0) * (h - 19.0) / 8.0));
  }
  return v;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const int T = spec.periods;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> cloud(0.3, 1.0);

  SyntheticData out;
  const TariffSpec tariff = spec.tariff();
  const Vector d_bl = spec.d_bl.size() ? spec.d_bl : default_baseload(T, spec.base_load);
  out.dataset.feature_names = {"temperature", "hour_sin", "hour_cos"};

  for (int s = 0; s < spec.days; ++s) {
    DaySample day;
    day.day_index = s;
    day.date = add_days(spec.start_date, s);
    const double offset = spec.temp_day_sd * normal(rng);
    const double sky = cloud(rng);
    const double factor = std::max(1.0 + spec.tou_jitter * normal(rng), 0.0);
    day.features.resize(T, 3);
    day.gen.resize(T);
    for (int t = 0; t < T; ++t) {
      const double h = 24.0 * t / T;
      const double angle = 2.0 * std::numbers::pi * t / T;
      day.features(t, 0) = spec.temp_mean + offset +
                           spec.temp_amplitude * std::sin(2.0 * std::numbers::pi * (h - 9.0) / 24.0);
      day.features(t, 1) = std::sin(angle);
      day.features(t, 2) = std::cos(angle);
      day.gen(t) = h > 6.0 && h < 18.0
                       ? spec.gen_peak * sky * std::sin(std::numbers::pi * (h - 6.0) / 12.0)
                       : 0.0;
    }
    out.dataset.tou.push_back(tariff.tou * factor);
    out.dataset.weekday.push_back(is_weekday(day.date));
    out.dataset.season.push_back(season_of(day.date));
    out.dataset.days.push_back(std::move(day));
  }

  if (spec.rule == EnvelopeRuleKind::kKernel && spec.kernel_rule) {
    spec.kernel_rule->validate();
    if (spec.kernel_rule->periods != T || spec.kernel_rule->features() != 3) {
      throw InvalidInput("synthetic: kernel rule shape does not match the generated features");
    }
    out.rule = spec.kernel_rule;
  } else if (spec.rule == EnvelopeRuleKind::kKernel) {
    std::vector<Matrix> feats;
    const int n_anchor = spec.anchor_days > 0 ? spec.anchor_days : spec.days;
    for (int s = 0; s < n_anchor; ++s) feats.push_back(out.dataset.days[s].features);
    KernelEnvelopeModel model = KernelEnvelopeModel::create(feats, spec.gamma);
    for (Family f : kFamilies) {
      const int i = static_cast<int>(f);
      model.beta0[i] = spec.envelope[i];
      Matrix& b = model.beta[i];
      for (int s = 0; s < model.days; ++s) {
        for (int t = 0; t < T; ++t) b(s, t) = spec.kernel_scale * normal(rng);
      }
      b.array() -= b.mean();
    }
    out.rule = std::move(model);
  }

  out.signals = build_day_signals(out.dataset, tariff);
  for (int s = 0; s < spec.days; ++s) {
    DaySample& day = out.dataset.days[s];
    DemandAttributes a;
    a.d_bl = d_bl;
    if (out.rule) {
      const EnvelopeForecast env = envelope_forecast(*out.rule, day.features);
      a.env_sf_plus = env.sf_plus;
      a.env_sf_minus = env.sf_minus;
      a.env_sd = env.sd;
    } else {
      a.env_sf_plus = Vector::Constant(T, spec.envelope[0]);
      a.env_sf_minus = Vector::Constant(T, spec.envelope[1]);
      a.env_sd = Vector::Constant(T, spec.envelope[2]);
    }
    const FopSolution sol = solve_fop(out.signals.prices[s], out.signals.costs[s], a, spec.t_max, day.gen);
    day.demand = a.d_bl + sol.d_sf + sol.d_sd - day.gen;
    if (spec.noise_sigma > 0.0) {
      for (auto& x : day.demand) x += spec.noise_sigma * normal(rng);
    }
    out.truth.push_back(std::move(a));
    out.decisions.push_back(sol.theta);
  }
  out.dataset.validate();
  return out;
}

}  // namespace flexio
