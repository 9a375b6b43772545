#include "flexio/dataset.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "flexio/format.hpp"

namespace flexio {
namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  for (auto& f : out) {
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.pop_back();
    while (!f.empty() && f.front() == ' ') f.erase(f.begin());
  }
  return out;
}

std::chrono::year_month_day parse_date(const std::string& date) {
  int y = 0;
  int m = 0;
  int d = 0;
  char sep1 = 0;
  char sep2 = 0;
  std::istringstream in(date);
  in >> y >> sep1 >> m >> sep2 >> d;
  const std::chrono::year_month_day ymd{std::chrono::year{y},
                                        std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!in || sep1 != '-' || sep2 != '-' || !in.eof() || !ymd.ok()) {
    throw InvalidInput("invalid date '" + date + "' (expected YYYY-MM-DD)");
  }
  return ymd;
}

// Running mean or sum of the rows sharing one (date, hour).
struct Cell {
  std::vector<double> sum;
  int count = 0;
};

}  // namespace

void Dataset::validate() const {
  if (days.empty()) return;
  const auto T = periods();
  const auto F = features();
  for (std::size_t s = 0; s < days.size(); ++s) {
    const std::string where = "dataset day " + std::to_string(s) + ": ";
    try {
      days[s].validate();
    } catch (const InvalidInput& e) {
      throw InvalidInput(where + e.what());
    }
    if (days[s].periods() != T || days[s].features.cols() != F) {
      throw InvalidInput(where + "shape differs from day 0");
    }
    if (s > 0 && days[s].day_index <= days[s - 1].day_index) {
      throw InvalidInput(where + "day_index must be strictly increasing");
    }
  }
  if (!feature_names.empty() && static_cast<Eigen::Index>(feature_names.size()) != F) {
    throw InvalidInput("dataset: one feature name per feature column required");
  }
  if (!weekday.empty() && weekday.size() != days.size()) throw InvalidInput("dataset: weekday flags");
  if (!season.empty() && season.size() != days.size()) throw InvalidInput("dataset: season tags");
  if (!tou.empty()) {
    if (tou.size() != days.size()) throw InvalidInput("dataset: one tou vector per day required");
    for (const auto& v : tou) {
      check_length(v, T, "dataset: tou");
      check_finite(v, "dataset: tou");
    }
  }
}

Dataset Dataset::slice(std::size_t first, std::size_t count) const {
  if (first + count > days.size()) throw InvalidInput("dataset: slice out of range");
  Dataset out;
  out.feature_names = feature_names;
  auto take = [&](const auto& src, auto& dst) {
    if (!src.empty()) dst.assign(src.begin() + first, src.begin() + first + count);
  };
  take(days, out.days);
  take(weekday, out.weekday);
  take(season, out.season);
  take(tou, out.tou);
  return out;
}

bool is_weekday(const std::string& date) {
  const std::chrono::weekday wd{std::chrono::sys_days{parse_date(date)}};
  return wd.c_encoding() >= 1 && wd.c_encoding() <= 5;
}

std::string season_of(const std::string& date) {
  const unsigned m = static_cast<unsigned>(parse_date(date).month());
  if (m == 12 || m <= 2) return "winter";
  if (m <= 5) return "spring";
  if (m <= 8) return "summer";
  return "autumn";
}

Dataset parse_csv(const std::string& text, const CsvSchema& schema, const std::string& source) {
  if (schema.periods < 1) throw InvalidInput("csv schema: periods must be >= 1");
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput(source + ": empty file");
  const std::vector<std::string> header = split_line(line);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = i;

  const bool tdiff = !schema.tdiff_temperature.empty() || !schema.tdiff_apparent.empty();
  if (tdiff && (schema.tdiff_temperature.empty() || schema.tdiff_apparent.empty())) {
    throw InvalidInput("csv schema: tdiff needs both temperature columns");
  }
  std::vector<std::string> required{schema.date_column, schema.hour_column, schema.demand_column,
                                    schema.generation_column};
  if (!schema.tou_column.empty()) required.push_back(schema.tou_column);
  if (tdiff) {
    required.push_back(schema.tdiff_temperature);
    required.push_back(schema.tdiff_apparent);
  }
  std::vector<std::string> features = schema.feature_columns;
  if (features.empty()) {
    for (const auto& h : header) {
      if (std::find(required.begin(), required.end(), h) == required.end()) features.push_back(h);
    }
  }
  std::vector<std::string> missing;
  for (const auto& name : required) {
    if (!index.count(name)) missing.push_back(name);
  }
  for (const auto& name : features) {
    if (!index.count(name)) missing.push_back(name);
  }
  if (!missing.empty()) {
    std::string msg = source + ": missing columns:";
    for (const auto& m : missing) msg += " '" + m + "'";
    throw InvalidInput(msg);
  }

  // Value slots per cell: demand, gen, [tou], [T, Ta], features...
  std::vector<std::string> value_cols{schema.demand_column, schema.generation_column};
  if (!schema.tou_column.empty()) value_cols.push_back(schema.tou_column);
  if (tdiff) {
    value_cols.push_back(schema.tdiff_temperature);
    value_cols.push_back(schema.tdiff_apparent);
  }
  const std::size_t first_feature = value_cols.size();
  value_cols.insert(value_cols.end(), features.begin(), features.end());

  std::map<std::string, std::vector<Cell>> cells;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_line(line);
    const std::string at = source + ": line " + std::to_string(line_no);
    if (fields.size() != header.size()) {
      throw InvalidInput(at + ": expected " + std::to_string(header.size()) + " fields, got " +
                         std::to_string(fields.size()));
    }
    const std::string& date = fields[index[schema.date_column]];
    try {
      parse_date(date);
    } catch (const InvalidInput& e) {
      throw InvalidInput(at + ", column '" + schema.date_column + "': " + e.what());
    }
    const long long hour =
        parse_int(fields[index[schema.hour_column]], at + ", column '" + schema.hour_column + "'");
    if (hour < 0 || hour >= schema.periods) {
      throw InvalidInput(at + ", column '" + schema.hour_column + "': hour " + std::to_string(hour) +
                         " outside [0, " + std::to_string(schema.periods) + ")");
    }
    auto& day = cells[date];
    if (day.empty()) day.resize(static_cast<std::size_t>(schema.periods));
    Cell& cell = day[static_cast<std::size_t>(hour)];
    if (cell.sum.empty()) cell.sum.assign(value_cols.size(), 0.0);
    for (std::size_t k = 0; k < value_cols.size(); ++k) {
      const std::string& raw = fields[index[value_cols[k]]];
      const std::string where = at + ", column '" + value_cols[k] + "' (date " + date + ", hour " +
                                std::to_string(hour) + ")";
      if (raw.empty()) throw InvalidInput(where + ": empty cell");
      const double v = parse_double(raw, where);
      if (!std::isfinite(v)) throw InvalidInput(where + ": value must be finite");
      cell.sum[k] += v;
    }
    ++cell.count;
  }
  if (cells.empty()) throw InvalidInput(source + ": no data rows");

  Dataset out;
  out.feature_names = features;
  if (tdiff) out.feature_names.push_back("tdiff");
  const auto T = static_cast<Eigen::Index>(schema.periods);
  const auto F = static_cast<Eigen::Index>(out.feature_names.size());
  std::vector<Vector> tdiff_raw;
  int position = 0;
  for (const auto& [date, day] : cells) {
    const int day_index = position++;
    for (Eigen::Index t = 0; t < T; ++t) {
      if (day[t].count == 0) {
        throw InvalidInput(source + ": day " + std::to_string(day_index) + " (" + date +
                           "), hour " + std::to_string(t) + ": no data");
      }
    }
    if (schema.weekdays_only && !is_weekday(date)) continue;
    DaySample s;
    s.date = date;
    s.day_index = day_index;
    s.demand.resize(T);
    s.gen.resize(T);
    s.features.resize(T, F);
    Vector tou(T);
    Vector td(T);
    for (Eigen::Index t = 0; t < T; ++t) {
      const Cell& c = day[t];
      const double div = schema.aggregation == Aggregation::kMean ? c.count : 1.0;
      s.demand(t) = c.sum[0] / div;
      s.gen(t) = c.sum[1] / div;
      std::size_t k = 2;
      if (!schema.tou_column.empty()) tou(t) = c.sum[k++] / c.count;
      if (tdiff) {
        const double temp = c.sum[k] / c.count;
        const double app = c.sum[k + 1] / c.count;
        if (!(temp > 0.0 && app > 0.0)) {
          throw InvalidInput(source + ": day " + std::to_string(day_index) + " (" + date +
                             "), hour " + std::to_string(t) +
                             ": tdiff needs positive temperatures (use kelvin)");
        }
        td(t) = temp == app ? temp : (temp - app) / (std::log(temp) - std::log(app));
      }
      for (std::size_t f = 0; f < features.size(); ++f) {
        s.features(t, static_cast<Eigen::Index>(f)) = c.sum[first_feature + f] / c.count;
      }
    }
    if (tdiff) tdiff_raw.push_back(td);
    if (!schema.tou_column.empty()) out.tou.push_back(tou);
    out.weekday.push_back(is_weekday(date));
    out.season.push_back(season_of(date));
    out.days.push_back(std::move(s));
  }
  if (out.days.empty()) throw InvalidInput(source + ": no days left after filtering");
  if (tdiff) {
    double lo = tdiff_raw.front().minCoeff();
    double hi = tdiff_raw.front().maxCoeff();
    for (const auto& v : tdiff_raw) {
      lo = std::min(lo, v.minCoeff());
      hi = std::max(hi, v.maxCoeff());
    }
    for (std::size_t s = 0; s < out.days.size(); ++s) {
      if (hi > lo) {
        out.days[s].features.col(F - 1) = ((tdiff_raw[s].array() - lo) / (hi - lo) - 0.5).matrix();
      } else {
        out.days[s].features.col(F - 1).setZero();
      }
    }
  }
  out.validate();
  return out;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), schema, path);
}

std::string to_csv(const Dataset& data) {
  data.validate();
  std::ostringstream out;
  out << "date,hour,net_demand_kwh,generation_kwh";
  const bool tou = !data.tou.empty();
  if (tou) out << ",tou_price";
  for (Eigen::Index f = 0; f < data.features(); ++f) {
    out << ',' << (data.feature_names.empty() ? "f" + std::to_string(f) : data.feature_names[f]);
  }
  out << '\n';
  for (std::size_t s = 0; s < data.size(); ++s) {
    const auto& d = data.days[s];
    const std::string date = d.date.empty() ? "day" + std::to_string(d.day_index) : d.date;
    for (Eigen::Index t = 0; t < d.periods(); ++t) {
      out << date << ',' << t << ',' << format_double(d.demand(t)) << ',' << format_double(d.gen(t));
      if (tou) out << ',' << format_double(data.tou[s](t));
      for (Eigen::Index f = 0; f < d.features.cols(); ++f) out << ',' << format_double(d.features(t, f));
      out << '\n';
    }
  }
  return out.str();
}

void save_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << to_csv(data);
}

std::vector<FlexBounds> default_bounds(const Dataset& data) {
  std::vector<FlexBounds> out;
  out.reserve(data.size());
  for (const auto& d : data.days) {
    const Vector k = d.demand.cwiseAbs();
    out.push_back(FlexBounds{k, k, k});
  }
  return out;
}

DaySignals build_day_signals(const std::vector<Vector>& tou, const TariffSpec& tariff) {
  DaySignals out;
  for (const auto& v : tou) {
    out.prices.push_back(build_tou_prices(tariff.flat, v, tariff.shed_rule));
    out.costs.push_back(build_comfort_costs(out.prices.back(), tariff.flat, v, tariff.shed_cost));
  }
  return out;
}

DaySignals build_day_signals(const Dataset& data, const TariffSpec& tariff) {
  if (!data.tou.empty()) return build_day_signals(data.tou, tariff);
  if (tariff.tou.size() != data.periods()) {
    throw InvalidInput("tariff: the time-of-use schedule needs one price per period");
  }
  return build_day_signals(std::vector<Vector>(data.size(), tariff.tou), tariff);
}

}  // namespace flexio
