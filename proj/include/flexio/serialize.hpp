#pragma once

#include <iosfwd>
#include <string>

#include "flexio/dataset.hpp"
#include "flexio/fit.hpp"

namespace flexio {

// Plain-text formats. Doubles are written in shortest round-trip form, so
// save followed by load reproduces every value bit for bit.

void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in, const std::string& source = "<stream>");
void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

void write_fit(std::ostream& out, const FitResult& fit);
FitResult read_fit(std::istream& in, const std::string& source = "<stream>");
void save_fit(const std::string& path, const FitResult& fit);
FitResult load_fit(const std::string& path);

}  // namespace flexio
