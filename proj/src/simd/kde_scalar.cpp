#include "coslat/simd/kde_kernels.hpp"

#include <cassert>
#include <cmath>
#include <limits>

namespace coslat::simd::scalar {

void kde_sum(const KernelBatch& k, QueryBatch q, std::span<double> out) {
  assert(q.q1.size() == q.q2.size() && out.size() == q.q1.size());
  const std::size_t n = k.c1.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double a = q.q1[i];
    const double b = q.q2[i];
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d1 = a - k.c1[j];
      const double d2 = b - k.c2[j];
      acc += k.weights[j] * std::exp(-(k.half_prec1 * d1 * d1 + k.half_prec2 * d2 * d2));
    }
    out[i] = k.norm * acc;
  }
}

void kde_log_sum(const KernelBatch& k, QueryBatch q, std::span<double> out) {
  assert(q.q1.size() == q.q2.size() && out.size() == q.q1.size());
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  const std::size_t n = k.c1.size();
  const double log_norm = std::log(k.norm);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double a = q.q1[i];
    const double b = q.q2[i];
    double peak = kNegInf;
    for (std::size_t j = 0; j < n; ++j) {
      if (k.weights[j] <= 0.0) continue;
      const double d1 = a - k.c1[j];
      const double d2 = b - k.c2[j];
      const double e = -(k.half_prec1 * d1 * d1 + k.half_prec2 * d2 * d2);
      if (e > peak) peak = e;
    }
    if (peak == kNegInf) {
      out[i] = kNegInf;
      continue;
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d1 = a - k.c1[j];
      const double d2 = b - k.c2[j];
      const double e = -(k.half_prec1 * d1 * d1 + k.half_prec2 * d2 * d2);
      acc += k.weights[j] * std::exp(e - peak);
    }
    out[i] = std::log(acc) + peak + log_norm;
  }
}

void exp_inplace(std::span<double> v) {
  for (double& x : v) x = std::exp(x);
}

}  // namespace coslat::simd::scalar
