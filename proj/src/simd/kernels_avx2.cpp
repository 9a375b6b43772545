// Compiled with -mavx2 -mfma; only reached through avx2_kernels() after a CPU check.
#include <immintrin.h>

#include <cmath>

#include "flexio/simd/kernels.hpp"

namespace flexio::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

// exp(x) by Cody-Waite reduction to |r| <= ln2/2 and a degree-13 Taylor
// polynomial. Results below the normal range flush to zero.
inline __m256d exp_pd(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634);
  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  const __m256d lo_limit = _mm256_set1_pd(-708.39);
  const __m256d hi_limit = _mm256_set1_pd(709.78);
  const __m256d magic = _mm256_set1_pd(6755399441055744.0);  // 2^52 + 2^51

  const __m256d underflow = _mm256_cmp_pd(x, lo_limit, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lo_limit), hi_limit);
  const __m256d k = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(k, ln2_hi, x);
  r = _mm256_fnmadd_pd(k, ln2_lo, r);

  static constexpr double kCoeffs[] = {
      1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0,
      1.0 / 362880.0,     1.0 / 40320.0,     1.0 / 5040.0,      1.0 / 720.0,
      1.0 / 120.0,        1.0 / 24.0,        1.0 / 6.0,         0.5,
      1.0,                1.0};
  __m256d poly = _mm256_set1_pd(kCoeffs[0]);
  for (std::size_t i = 1; i < sizeof(kCoeffs) / sizeof(kCoeffs[0]); ++i) {
    poly = _mm256_fmadd_pd(poly, r, _mm256_set1_pd(kCoeffs[i]));
  }

  const __m256i k_int =
      _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(k, magic)), _mm256_castpd_si256(magic));
  const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(k_int, _mm256_set1_epi64x(1023)), 52);
  const __m256d result = _mm256_mul_pd(poly, _mm256_castsi256_pd(bits));
  return _mm256_andnot_pd(underflow, result);
}

void laplace_row(const double* query, const double* anchors, std::size_t count,
                 std::size_t features, double gamma, double* out) {
  const __m256d neg_gamma = _mm256_set1_pd(-gamma);
  std::size_t i = 0;
  for (; i + 4 <= count; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t f = 0; f < features; ++f) {
      const __m256d diff =
          _mm256_sub_pd(_mm256_set1_pd(query[f]), _mm256_loadu_pd(anchors + f * count + i));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
    }
    _mm256_storeu_pd(out + i, exp_pd(_mm256_mul_pd(neg_gamma, _mm256_sqrt_pd(acc))));
  }
  for (; i < count; ++i) {
    double acc = 0.0;
    for (std::size_t f = 0; f < features; ++f) {
      const double diff = query[f] - anchors[f * count + i];
      acc += diff * diff;
    }
    out[i] = std::exp(-gamma * std::sqrt(acc));
  }
}

double abs_diff_sum(const double* a, const double* b, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_andnot_pd(sign, d));
  }
  double total = hsum(acc);
  for (; i < n; ++i) total += std::abs(a[i] - b[i]);
  return total;
}

double sq_diff_sum(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double total = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    total += d * d;
  }
  return total;
}

double pinball_sum(double level, const double* values, const double* y, std::size_t n) {
  const __m256d q = _mm256_set1_pd(level);
  const __m256d q1 = _mm256_set1_pd(1.0 - level);
  const __m256d zero = _mm256_setzero_pd();
  __m256d acc = zero;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d yv = _mm256_loadu_pd(y + i);
    const __m256d vv = _mm256_loadu_pd(values + i);
    const __m256d above = _mm256_mul_pd(q, _mm256_sub_pd(yv, vv));
    const __m256d below = _mm256_mul_pd(q1, _mm256_sub_pd(vv, yv));
    const __m256d mask = _mm256_cmp_pd(yv, vv, _CMP_GE_OQ);
    acc = _mm256_add_pd(acc, _mm256_blendv_pd(below, above, mask));
  }
  double total = hsum(acc);
  for (; i < n; ++i) {
    total += y[i] >= values[i] ? level * (y[i] - values[i]) : (1.0 - level) * (values[i] - y[i]);
  }
  return total;
}

}  // namespace

const KernelTable& avx2_kernel_table() {
  static const KernelTable table{"avx2", laplace_row, abs_diff_sum, sq_diff_sum, pinball_sum};
  return table;
}

}  // namespace flexio::simd
