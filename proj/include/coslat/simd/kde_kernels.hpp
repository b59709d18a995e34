#pragma once

// Gaussian kernel-sum kernels.
//
// Every density evaluation in the filter (measurement-message products,
// prediction-message densities, log-message fits) reduces to
//
//   out[i] = norm * sum_j w_j * exp(-(a1 * (q1_i - c1_j)^2 + a2 * (q2_i - c2_j)^2))
//
// over a structure-of-arrays set of kernel centers. The scalar variant is the
// reference; the AVX2 variant is selected at runtime when the CPU supports it
// and is held to the scalar result by the equivalence tests.

#include <cstddef>
#include <span>
#include <string_view>

namespace coslat::simd {

enum class Backend { Scalar, Avx2 };

struct KernelBatch {
  std::span<const double> c1;
  std::span<const double> c2;
  std::span<const double> weights;
  double half_prec1 = 0.5;  // 1 / (2 h1^2)
  double half_prec2 = 0.5;  // 1 / (2 h2^2)
  double norm = 1.0;        // 1 / (2 pi h1 h2) for a normalized kernel
};

struct QueryBatch {
  std::span<const double> q1;
  std::span<const double> q2;
};

using KdeFn = void (*)(const KernelBatch&, QueryBatch, std::span<double>);

namespace scalar {
void kde_sum(const KernelBatch& k, QueryBatch q, std::span<double> out);
/// out[i] = log of the kde_sum value, computed with a max shift so that it
/// stays finite where the linear sum underflows. -inf when every weight is 0.
void kde_log_sum(const KernelBatch& k, QueryBatch q, std::span<double> out);
void exp_inplace(std::span<double> v);
}  // namespace scalar

#ifdef COSLAT_HAVE_AVX2
namespace avx2 {
void kde_sum(const KernelBatch& k, QueryBatch q, std::span<double> out);
void kde_log_sum(const KernelBatch& k, QueryBatch q, std::span<double> out);
void exp_inplace(std::span<double> v);
}  // namespace avx2
#endif

/// Best backend the running CPU supports. COSLAT_SIMD=scalar in the
/// environment forces the reference path.
Backend detect_backend();
Backend active_backend();
bool backend_available(Backend b);
/// Throws std::invalid_argument when the backend is not available here.
void set_backend(Backend b);
std::string_view backend_name(Backend b);

void kde_sum(const KernelBatch& k, QueryBatch q, std::span<double> out);
void kde_log_sum(const KernelBatch& k, QueryBatch q, std::span<double> out);
void exp_inplace(std::span<double> v);

}  // namespace coslat::simd
