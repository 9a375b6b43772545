#pragma once

#include <string>
#include <string_view>

namespace flexio {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Strict parse of a whole field; throws InvalidInput naming `where` on failure.
double parse_double(std::string_view text, const std::string& where);
long long parse_int(std::string_view text, const std::string& where);

}  // namespace flexio
