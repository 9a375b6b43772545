#include "flexio/format.hpp"

#include <charconv>
#include <cmath>

#include "flexio/types.hpp"

namespace flexio {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, const std::string& where) {
  const std::string_view t = trim(text);
  double value = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw InvalidInput(where + ": expected a number, got '" + std::string(text) + "'");
  }
  return value;
}

long long parse_int(std::string_view text, const std::string& where) {
  const std::string_view t = trim(text);
  long long value = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw InvalidInput(where + ": expected an integer, got '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace flexio
