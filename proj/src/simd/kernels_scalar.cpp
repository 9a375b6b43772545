#include <cmath>

#include "flexio/simd/kernels.hpp"

namespace flexio::simd {
namespace {

void laplace_row(const double* query, const double* anchors, std::size_t count,
                 std::size_t features, double gamma, double* out) {
  for (std::size_t i = 0; i < count; ++i) {
    double acc = 0.0;
    for (std::size_t f = 0; f < features; ++f) {
      const double diff = query[f] - anchors[f * count + i];
      acc += diff * diff;
    }
    out[i] = std::exp(-gamma * std::sqrt(acc));
  }
}

double abs_diff_sum(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(a[i] - b[i]);
  return acc;
}

double sq_diff_sum(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

double pinball_sum(double level, const double* values, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += y[i] >= values[i] ? level * (y[i] - values[i]) : (1.0 - level) * (values[i] - y[i]);
  }
  return acc;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", laplace_row, abs_diff_sum, sq_diff_sum, pinball_sum};
  return table;
}

}  // namespace flexio::simd
