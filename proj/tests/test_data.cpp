#include <gtest/gtest.h>

#include <sstream>

#include "flexio/dataset.hpp"
#include "flexio/fop.hpp"
#include "flexio/serialize.hpp"
#include "flexio/synthetic.hpp"
#include "support.hpp"

namespace flexio {
namespace {

const char* kToy =
    "date,hour,net_demand_kwh,generation_kwh,temp\n"
    "2024-03-04,0,1.5,0,10\n"
    "2024-03-04,1,-0.5,1,11\n"
    "2024-03-04,2,2,0.5,12\n"
    "2024-03-05,0,1,0,9\n"
    "2024-03-05,1,1.25,0.25,8\n"
    "2024-03-05,2,3,0,7\n";

CsvSchema toy_schema() {
  CsvSchema s;
  s.periods = 3;
  return s;
}

TEST(Csv, LoadsToyFile) {
  const Dataset d = parse_csv(kToy, toy_schema());
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.periods(), 3);
  EXPECT_EQ(d.feature_names, std::vector<std::string>{"temp"});
  EXPECT_DOUBLE_EQ(d.days[0].demand(1), -0.5);
  EXPECT_DOUBLE_EQ(d.days[1].gen(1), 0.25);
  EXPECT_DOUBLE_EQ(d.days[1].features(2, 0), 7.0);
  EXPECT_EQ(d.days[1].date, "2024-03-05");
  EXPECT_TRUE(d.weekday[0]);
  EXPECT_EQ(d.season[0], "spring");
}

TEST(Csv, RowsMayArriveInAnyOrder) {
  const std::string shuffled =
      "date,hour,net_demand_kwh,generation_kwh,temp\n"
      "2024-03-05,2,3,0,7\n"
      "2024-03-04,1,-0.5,1,11\n"
      "2024-03-04,0,1.5,0,10\n"
      "2024-03-05,0,1,0,9\n"
      "2024-03-04,2,2,0.5,12\n"
      "2024-03-05,1,1.25,0.25,8\n";
  const Dataset a = parse_csv(kToy, toy_schema());
  const Dataset b = parse_csv(shuffled, toy_schema());
  for (int s = 0; s < 2; ++s) EXPECT_EQ(a.days[s].demand, b.days[s].demand);
}

TEST(Csv, HoleNamesTheMissingCell) {
  std::string text = kToy;
  const std::string row = "2024-03-05,2,3,0,7\n";
  text.erase(text.find(row), row.size());
  try {
    parse_csv(text, toy_schema(), "toy.csv");
    FAIL() << "expected an error";
  } catch (const InvalidInput& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("day 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("hour 2"), std::string::npos) << msg;
  }
}

TEST(Csv, ReportsBadCellsAndMissingColumns) {
  std::string text = kToy;
  text.replace(text.find("1.25"), 4, "abc");
  EXPECT_THROW(parse_csv(text, toy_schema()), InvalidInput);
  try {
    parse_csv("date,hour,temp\n2024-03-04,0,1\n", toy_schema());
    FAIL();
  } catch (const InvalidInput& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("net_demand_kwh"), std::string::npos);
    EXPECT_NE(msg.find("generation_kwh"), std::string::npos);
  }
}

TEST(Csv, DuplicateRowsAreAveraged) {
  std::string text = kToy;
  text += "2024-03-04,0,2.5,0,10\n";
  const Dataset d = parse_csv(text, toy_schema());
  EXPECT_DOUBLE_EQ(d.days[0].demand(0), 2.0);
  CsvSchema sum = toy_schema();
  sum.aggregation = Aggregation::kSum;
  EXPECT_DOUBLE_EQ(parse_csv(text, sum).days[0].demand(0), 4.0);
}

TEST(Csv, WeekdayFilterKeepsFiveDaysOfAWeek) {
  std::ostringstream text;
  text << "date,hour,net_demand_kwh,generation_kwh\n";
  for (int d = 4; d <= 10; ++d) {  // Monday 2024-03-04 to Sunday 2024-03-10
    for (int h = 0; h < 2; ++h) {
      text << "2024-03-" << (d < 10 ? "0" : "") << d << ',' << h << ",1,0\n";
    }
  }
  CsvSchema s;
  s.periods = 2;
  EXPECT_EQ(parse_csv(text.str(), s).size(), 7u);
  s.weekdays_only = true;
  const Dataset d = parse_csv(text.str(), s);
  ASSERT_EQ(d.size(), 5u);
  EXPECT_EQ(d.days.back().date, "2024-03-08");
  EXPECT_EQ(d.days.back().day_index, 4);
}

TEST(Csv, TdiffFeatureIsScaledOntoHalfRange) {
  const std::string text =
      "date,hour,net_demand_kwh,generation_kwh,t,ta\n"
      "2024-01-01,0,1,0,280,275\n"
      "2024-01-01,1,1,0,290,270\n"
      "2024-01-02,0,1,0,285,285\n"
      "2024-01-02,1,1,0,300,280\n";
  CsvSchema s;
  s.periods = 2;
  s.tdiff_temperature = "t";
  s.tdiff_apparent = "ta";
  const Dataset d = parse_csv(text, s);
  ASSERT_EQ(d.feature_names.back(), "tdiff");
  double lo = 1.0;
  double hi = -1.0;
  for (const auto& day : d.days) {
    lo = std::min(lo, day.features.col(d.features() - 1).minCoeff());
    hi = std::max(hi, day.features.col(d.features() - 1).maxCoeff());
  }
  EXPECT_DOUBLE_EQ(lo, -0.5);
  EXPECT_DOUBLE_EQ(hi, 0.5);
}

TEST(Csv, RoundTripsThroughText) {
  SyntheticSpec spec;
  spec.days = 4;
  spec.noise_sigma = 0.1;
  const Dataset d = generate_synthetic(spec).dataset;
  CsvSchema schema;
  schema.tou_column = "tou_price";
  const Dataset back = parse_csv(to_csv(d), schema);
  ASSERT_EQ(back.size(), d.size());
  for (std::size_t s = 0; s < d.size(); ++s) {
    EXPECT_EQ(back.days[s].demand, d.days[s].demand);
    EXPECT_EQ(back.days[s].gen, d.days[s].gen);
    EXPECT_EQ(back.days[s].features, d.days[s].features);
    EXPECT_EQ(back.tou[s], d.tou[s]);
  }
}

TEST(Bounds, AreAbsoluteDemand) {
  Dataset d;
  DaySample day;
  day.demand = Vector(2);
  day.demand << -1.0, 2.0;
  day.gen = Vector::Zero(2);
  day.features = Matrix::Zero(2, 1);
  d.days.push_back(day);
  day.demand = Vector::Zero(2);
  day.day_index = 1;
  d.days.push_back(day);
  day.demand = Vector::Constant(2, 3.0);
  day.day_index = 2;
  d.days.push_back(day);
  const auto k = default_bounds(d);
  ASSERT_EQ(k.size(), 3u);
  EXPECT_EQ(k[0].sf_plus(0), 1.0);
  EXPECT_EQ(k[0].sf_minus(1), 2.0);
  EXPECT_EQ(k[0].sd(0), 1.0);
  EXPECT_EQ(k[1].sf_plus.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(k[2].sd, Vector::Constant(2, 3.0));
}

TEST(Calendar, WeekdaysAndSeasons) {
  EXPECT_TRUE(is_weekday("2024-01-01"));
  EXPECT_FALSE(is_weekday("2024-01-06"));
  EXPECT_EQ(season_of("2024-01-15"), "winter");
  EXPECT_EQ(season_of("2024-07-15"), "summer");
  EXPECT_EQ(season_of("2024-10-15"), "autumn");
  EXPECT_THROW(is_weekday("2024-02-30"), InvalidInput);
}

TEST(Synthetic, IsDeterministicUnderASeed) {
  SyntheticSpec spec;
  spec.days = 3;
  spec.noise_sigma = 0.2;
  spec.seed = 11;
  const SyntheticData a = generate_synthetic(spec);
  const SyntheticData b = generate_synthetic(spec);
  for (int s = 0; s < 3; ++s) {
    EXPECT_EQ(a.dataset.days[s].demand, b.dataset.days[s].demand);
    EXPECT_EQ(a.dataset.days[s].features, b.dataset.days[s].features);
  }
  spec.seed = 12;
  EXPECT_NE(generate_synthetic(spec).dataset.days[0].demand, a.dataset.days[0].demand);
}

TEST(Synthetic, NoiselessDataReproducesTheModel) {
  for (EnvelopeRuleKind rule : {EnvelopeRuleKind::kConstant, EnvelopeRuleKind::kKernel}) {
    SyntheticSpec spec;
    spec.days = 3;
    spec.rule = rule;
    spec.t_max = 6;
    const SyntheticData data = generate_synthetic(spec);
    for (int s = 0; s < 3; ++s) {
      const DaySample& day = data.dataset.days[s];
      const FopSolution sol = solve_fop(data.signals.prices[s], data.signals.costs[s],
                                        data.truth[s], spec.t_max, day.gen);
      const Vector model = data.truth[s].d_bl + sol.d_sf + sol.d_sd - day.gen;
      EXPECT_LT((model - day.demand).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LE((data.decisions[s].delta_plus + data.decisions[s].delta_minus).cast<int>().sum(),
                spec.t_max);
      EXPECT_GE(data.truth[s].env_sd.minCoeff(), 0.0);
    }
  }
}

TEST(Synthetic, ZeroSpreadMeansNoShifting) {
  SyntheticSpec spec;
  spec.days = 3;
  spec.peak_price = spec.flat_price;
  spec.offpeak_price = spec.flat_price;
  spec.tou_jitter = 0.0;
  const SyntheticData data = generate_synthetic(spec);
  for (int s = 0; s < 3; ++s) {
    const auto& th = data.decisions[s];
    EXPECT_EQ(th.d_sf_plus.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(th.d_sf_minus.cwiseAbs().maxCoeff(), 0.0);
    const DaySample& day = data.dataset.days[s];
    const Vector kept = data.truth[s].env_sd - th.d_sd_minus;
    EXPECT_LT((data.truth[s].d_bl + kept - day.gen - day.demand).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Synthetic, RejectsBadSpecs) {
  SyntheticSpec spec;
  spec.t_max = 30;
  EXPECT_THROW(generate_synthetic(spec), InvalidInput);
  spec = SyntheticSpec();
  spec.noise_sigma = -1.0;
  EXPECT_THROW(generate_synthetic(spec), InvalidInput);
  spec = SyntheticSpec();
  spec.start_date = "2024-13-01";
  EXPECT_THROW(generate_synthetic(spec), InvalidInput);
}

TEST(Serialize, DatasetRoundTripsBitIdentically) {
  SyntheticSpec spec;
  spec.days = 3;
  spec.noise_sigma = 0.37;
  const Dataset d = generate_synthetic(spec).dataset;
  std::stringstream buf;
  write_dataset(buf, d);
  const std::string first = buf.str();
  const Dataset back = read_dataset(buf);
  std::stringstream again;
  write_dataset(again, back);
  EXPECT_EQ(again.str(), first);
  for (std::size_t s = 0; s < d.size(); ++s) {
    EXPECT_EQ(back.days[s].demand, d.days[s].demand);
    EXPECT_EQ(back.days[s].features, d.days[s].features);
    EXPECT_EQ(back.tou[s], d.tou[s]);
  }
  EXPECT_EQ(back.feature_names, d.feature_names);
  EXPECT_EQ(back.weekday, d.weekday);
}

TEST(Serialize, RejectsWrongHeaderAndTruncation) {
  std::stringstream bad("FLEXIO-FIT 1.0.0\n");
  EXPECT_THROW(read_dataset(bad), InvalidInput);
  SyntheticSpec spec;
  spec.days = 2;
  std::stringstream buf;
  write_dataset(buf, generate_synthetic(spec).dataset);
  std::string text = buf.str();
  std::stringstream cut(text.substr(0, text.size() / 2));
  EXPECT_THROW(read_dataset(cut), InvalidInput);
}

}  // namespace
}  // namespace flexio
