#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#include "coslat/simd/kde_kernels.hpp"

namespace coslat::simd {
namespace {

bool cpu_has_avx2() {
#if defined(COSLAT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{detect_backend()};
  return backend;
}

}  // namespace

Backend detect_backend() {
  if (const char* env = std::getenv("COSLAT_SIMD"); env && std::string(env) == "scalar") {
    return Backend::Scalar;
  }
  return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
}

bool backend_available(Backend b) {
  return b == Backend::Scalar || cpu_has_avx2();
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (!backend_available(b)) {
    throw std::invalid_argument("SIMD backend '" + std::string(backend_name(b)) +
                                "' is not available on this CPU");
  }
  current().store(b, std::memory_order_relaxed);
}

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
  }
  return "unknown";
}

void kde_sum(const KernelBatch& k, QueryBatch q, std::span<double> out) {
#ifdef COSLAT_HAVE_AVX2
  if (active_backend() == Backend::Avx2) return avx2::kde_sum(k, q, out);
#endif
  scalar::kde_sum(k, q, out);
}

namespace {

void shifted_log_sum(const KernelBatch& k, QueryBatch q, std::span<double> out) {
#ifdef COSLAT_HAVE_AVX2
  if (active_backend() == Backend::Avx2) return avx2::kde_log_sum(k, q, out);
#endif
  scalar::kde_log_sum(k, q, out);
}

}  // namespace

// The linear sum costs half as much, so it goes first and only the queries
// where it underflows are redone with the shifted log-sum.
void kde_log_sum(const KernelBatch& k, QueryBatch q, std::span<double> out) {
  constexpr double kSafe = 1e-280;
  kde_sum(k, q, out);
  std::vector<double> r1, r2;
  std::vector<std::size_t> redo;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] > kSafe) {
      out[i] = std::log(out[i]);
    } else {
      redo.push_back(i);
      r1.push_back(q.q1[i]);
      r2.push_back(q.q2[i]);
    }
  }
  if (redo.empty()) return;
  std::vector<double> lr(redo.size());
  shifted_log_sum(k, {r1, r2}, lr);
  for (std::size_t t = 0; t < redo.size(); ++t) out[redo[t]] = lr[t];
}

void exp_inplace(std::span<double> v) {
#ifdef COSLAT_HAVE_AVX2
  if (active_backend() == Backend::Avx2) return avx2::exp_inplace(v);
#endif
  scalar::exp_inplace(v);
}

}  // namespace coslat::simd
