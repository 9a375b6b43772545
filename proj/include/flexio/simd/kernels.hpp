#pragma once

#include <cstddef>

namespace flexio::simd {

/// Data-parallel inner loops. Every variant must agree with the scalar
/// reference to rounding; tests/test_simd.cpp checks the equivalence.
struct KernelTable {
  const char* name;

  /// out[i] = exp(-gamma * ||query - anchor_i||_2). Anchors are stored
  /// feature-major: anchors[f * count + i].
  void (*laplace_row)(const double* query, const double* anchors, std::size_t count,
                      std::size_t features, double gamma, double* out);

  /// sum_i |a_i - b_i|
  double (*abs_diff_sum)(const double* a, const double* b, std::size_t n);

  /// sum_i (a_i - b_i)^2
  double (*sq_diff_sum)(const double* a, const double* b, std::size_t n);

  /// sum_i pinball(level, values_i, y_i)
  double (*pinball_sum)(double level, const double* values, const double* y, std::size_t n);
};

const KernelTable& scalar_kernels();

/// nullptr unless the AVX2 variant was compiled in and the CPU supports AVX2 and FMA.
const KernelTable* avx2_kernels();

/// The variant used by the library: AVX2 when available, unless the
/// environment variable FLEXIO_SIMD is set to "scalar".
const KernelTable& active_kernels();

}  // namespace flexio::simd
