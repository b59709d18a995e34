// Compiled with -mavx2 -mfma; only reached through the dispatcher after a
// CPUID check.

#include <immintrin.h>

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <limits>

#include "coslat/simd/kde_kernels.hpp"

namespace coslat::simd::avx2 {
namespace {

// exp(x) for x <= 709.78. Cody-Waite reduction x = k ln2 + r, |r| <= ln2/2,
// degree-13 Taylor polynomial for exp(r) (truncation below 1e-17), then a
// two-factor 2^k scale so results down to the subnormal range stay exact.
inline __m256d exp_pd(__m256d x) {
  const __m256d lo = _mm256_set1_pd(-745.2);
  const __m256d hi = _mm256_set1_pd(709.78);
  const __m256d under = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const __m256d k = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(k, _mm256_set1_pd(6.93147180369123816490e-01), x);
  r = _mm256_fnmadd_pd(k, _mm256_set1_pd(1.90821492927058770002e-10), r);

  __m256d p = _mm256_set1_pd(1.0 / 6227020800.0);
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 479001600.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 39916800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 3628800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 362880.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 40320.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 5040.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 720.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 120.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 24.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 6.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

  // k = k1 + k2 with both halves inside the normal exponent range.
  const __m256d k1 = _mm256_floor_pd(_mm256_mul_pd(k, _mm256_set1_pd(0.5)));
  const __m256d k2 = _mm256_sub_pd(k, k1);
  const __m256d bias = _mm256_set1_pd(1023.0 + 6755399441055744.0);
  const __m256i e1 = _mm256_slli_epi64(_mm256_castpd_si256(_mm256_add_pd(k1, bias)), 52);
  const __m256i e2 = _mm256_slli_epi64(_mm256_castpd_si256(_mm256_add_pd(k2, bias)), 52);
  p = _mm256_mul_pd(_mm256_mul_pd(p, _mm256_castsi256_pd(e1)), _mm256_castsi256_pd(e2));
  return _mm256_andnot_pd(under, p);
}

inline double hsum(__m256d v) {
  alignas(32) std::array<double, 4> a;
  _mm256_store_pd(a.data(), v);
  return (a[0] + a[1]) + (a[2] + a[3]);
}

inline double hmax(__m256d v) {
  alignas(32) std::array<double, 4> a;
  _mm256_store_pd(a.data(), v);
  return std::max(std::max(a[0], a[1]), std::max(a[2], a[3]));
}

inline __m256i tail_mask(std::size_t remaining) {
  return _mm256_setr_epi64x(remaining > 0 ? -1 : 0, remaining > 1 ? -1 : 0,
                            remaining > 2 ? -1 : 0, remaining > 3 ? -1 : 0);
}

inline __m256d exponent_arg(__m256d a, __m256d b, __m256d c1, __m256d c2, __m256d p1,
                            __m256d p2) {
  const __m256d d1 = _mm256_sub_pd(a, c1);
  const __m256d d2 = _mm256_sub_pd(b, c2);
  const __m256d s = _mm256_fmadd_pd(_mm256_mul_pd(p2, d2), d2, _mm256_mul_pd(_mm256_mul_pd(p1, d1), d1));
  return _mm256_sub_pd(_mm256_setzero_pd(), s);
}

}  // namespace

void kde_sum(const KernelBatch& k, QueryBatch q, std::span<double> out) {
  assert(q.q1.size() == q.q2.size() && out.size() == q.q1.size());
  const std::size_t n = k.c1.size();
  const std::size_t full = n & ~std::size_t{3};
  const __m256d p1 = _mm256_set1_pd(k.half_prec1);
  const __m256d p2 = _mm256_set1_pd(k.half_prec2);
  const __m256i mask = tail_mask(n - full);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const __m256d a = _mm256_set1_pd(q.q1[i]);
    const __m256d b = _mm256_set1_pd(q.q2[i]);
    __m256d acc = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j < full; j += 4) {
      const __m256d e = exponent_arg(a, b, _mm256_loadu_pd(&k.c1[j]), _mm256_loadu_pd(&k.c2[j]), p1, p2);
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(&k.weights[j]), exp_pd(e), acc);
    }
    if (j < n) {
      const __m256d c1 = _mm256_maskload_pd(k.c1.data() + j, mask);
      const __m256d c2 = _mm256_maskload_pd(k.c2.data() + j, mask);
      const __m256d w = _mm256_maskload_pd(k.weights.data() + j, mask);
      acc = _mm256_fmadd_pd(w, exp_pd(exponent_arg(a, b, c1, c2, p1, p2)), acc);
    }
    out[i] = k.norm * hsum(acc);
  }
}

void kde_log_sum(const KernelBatch& k, QueryBatch q, std::span<double> out) {
  assert(q.q1.size() == q.q2.size() && out.size() == q.q1.size());
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  const std::size_t n = k.c1.size();
  const std::size_t full = n & ~std::size_t{3};
  const __m256d p1 = _mm256_set1_pd(k.half_prec1);
  const __m256d p2 = _mm256_set1_pd(k.half_prec2);
  const __m256d neg_inf = _mm256_set1_pd(kNegInf);
  const __m256d zero = _mm256_setzero_pd();
  const __m256i mask = tail_mask(n - full);
  const double log_norm = std::log(k.norm);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const __m256d a = _mm256_set1_pd(q.q1[i]);
    const __m256d b = _mm256_set1_pd(q.q2[i]);

    __m256d vmax = neg_inf;
    std::size_t j = 0;
    for (; j < full; j += 4) {
      const __m256d e = exponent_arg(a, b, _mm256_loadu_pd(&k.c1[j]), _mm256_loadu_pd(&k.c2[j]), p1, p2);
      const __m256d live = _mm256_cmp_pd(_mm256_loadu_pd(&k.weights[j]), zero, _CMP_GT_OQ);
      vmax = _mm256_max_pd(vmax, _mm256_blendv_pd(neg_inf, e, live));
    }
    if (j < n) {
      const __m256d c1 = _mm256_maskload_pd(k.c1.data() + j, mask);
      const __m256d c2 = _mm256_maskload_pd(k.c2.data() + j, mask);
      const __m256d w = _mm256_maskload_pd(k.weights.data() + j, mask);
      const __m256d live = _mm256_cmp_pd(w, zero, _CMP_GT_OQ);
      vmax = _mm256_max_pd(vmax, _mm256_blendv_pd(neg_inf, exponent_arg(a, b, c1, c2, p1, p2), live));
    }
    const double peak = hmax(vmax);
    if (peak == kNegInf) {
      out[i] = kNegInf;
      continue;
    }

    const __m256d shift = _mm256_set1_pd(peak);
    __m256d acc = zero;
    for (j = 0; j < full; j += 4) {
      const __m256d e = exponent_arg(a, b, _mm256_loadu_pd(&k.c1[j]), _mm256_loadu_pd(&k.c2[j]), p1, p2);
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(&k.weights[j]), exp_pd(_mm256_sub_pd(e, shift)), acc);
    }
    if (j < n) {
      const __m256d c1 = _mm256_maskload_pd(k.c1.data() + j, mask);
      const __m256d c2 = _mm256_maskload_pd(k.c2.data() + j, mask);
      const __m256d w = _mm256_maskload_pd(k.weights.data() + j, mask);
      const __m256d e = exponent_arg(a, b, c1, c2, p1, p2);
      acc = _mm256_fmadd_pd(w, exp_pd(_mm256_sub_pd(e, shift)), acc);
    }
    out[i] = std::log(hsum(acc)) + peak + log_norm;
  }
}

void exp_inplace(std::span<double> v) {
  const std::size_t full = v.size() & ~std::size_t{3};
  std::size_t i = 0;
  for (; i < full; i += 4) {
    _mm256_storeu_pd(&v[i], exp_pd(_mm256_loadu_pd(&v[i])));
  }
  for (; i < v.size(); ++i) v[i] = std::exp(v[i]);
}

}  // namespace coslat::simd::avx2
