#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "coslat/rng.hpp"
#include "coslat/simd/kde_kernels.hpp"

using namespace coslat;
namespace sd = coslat::simd;

namespace {

struct Fixture {
  std::vector<double> c1, c2, w, q1, q2;
};

Fixture make(std::size_t centers, std::size_t queries, double spread, std::uint64_t seed) {
  Rng rng = make_stream(seed, StreamTag::Test);
  Fixture f;
  double total = 0;
  for (std::size_t j = 0; j < centers; ++j) {
    f.c1.push_back(spread * standard_normal(rng));
    f.c2.push_back(spread * standard_normal(rng));
    f.w.push_back(uniform01(rng));
    total += f.w.back();
  }
  for (double& v : f.w) v /= total;
  for (std::size_t i = 0; i < queries; ++i) {
    f.q1.push_back(2 * spread * standard_normal(rng));
    f.q2.push_back(2 * spread * standard_normal(rng));
  }
  return f;
}

bool close(double a, double b, double rel) {
  if (a == b) return true;
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

}  // namespace

TEST_CASE("backend selection") {
  CHECK(sd::backend_available(sd::Backend::Scalar));
  CHECK(sd::backend_name(sd::Backend::Scalar) == "scalar");
  CHECK(sd::backend_name(sd::Backend::Avx2) == "avx2");
  const sd::Backend before = sd::active_backend();
  sd::set_backend(sd::Backend::Scalar);
  CHECK(sd::active_backend() == sd::Backend::Scalar);
  if (!sd::backend_available(sd::Backend::Avx2)) {
    CHECK_THROWS_AS(sd::set_backend(sd::Backend::Avx2), std::invalid_argument);
  }
  sd::set_backend(before);
}

#ifdef COSLAT_HAVE_AVX2
TEST_CASE("avx2 kernels match the scalar reference") {
  if (!sd::backend_available(sd::Backend::Avx2)) {
    MESSAGE("AVX2 not supported on this CPU; equivalence not exercised");
    return;
  }
  // Center counts cover the masked tail (n % 4 = 1, 2, 3) and the empty loop.
  for (std::size_t centers : {1u, 2u, 3u, 4u, 5u, 7u, 64u, 501u}) {
    for (double spread : {0.5, 5.0, 60.0}) {
      const Fixture f = make(centers, 37, spread, 100 + centers);
      for (double hp : {0.25, 0.5, 3.0}) {
        const sd::KernelBatch k{f.c1, f.c2, f.w, hp, hp * 0.7, 0.08};
        std::vector<double> a(f.q1.size()), b(f.q1.size());
        sd::scalar::kde_sum(k, {f.q1, f.q2}, a);
        sd::avx2::kde_sum(k, {f.q1, f.q2}, b);
        for (std::size_t i = 0; i < a.size(); ++i) {
          // Below the normal range both sides lose relative precision.
          if (a[i] > 1e-290 || b[i] > 1e-290) CHECK(close(a[i], b[i], 1e-12));
        }
        sd::scalar::kde_log_sum(k, {f.q1, f.q2}, a);
        sd::avx2::kde_log_sum(k, {f.q1, f.q2}, b);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12 * std::max(1.0, std::abs(a[i])));
      }
    }
  }
}

TEST_CASE("avx2 exp matches std::exp") {
  if (!sd::backend_available(sd::Backend::Avx2)) return;
  std::vector<double> x;
  for (double v = -760.0; v <= 709.0; v += 0.37) x.push_back(v);
  x.push_back(0.0);
  x.push_back(-INFINITY);
  std::vector<double> a = x, b = x;
  sd::scalar::exp_inplace(a);
  sd::avx2::exp_inplace(b);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (a[i] > 1e-300) {
      CHECK(close(a[i], b[i], 1e-14));
    } else {
      CHECK(b[i] <= 1e-300);
    }
  }
}
#endif

TEST_CASE("log-sum kernel is finite far from all centers and -inf without mass") {
  const Fixture f = make(16, 4, 1.0, 7);
  const sd::KernelBatch k{f.c1, f.c2, f.w, 0.25, 0.25, 1.0};
  std::vector<double> q1{1e4}, q2{-1e4}, out(1);
  sd::kde_log_sum(k, {q1, q2}, out);
  CHECK(std::isfinite(out[0]));
  CHECK(out[0] == doctest::Approx(-0.25 * 2e8).epsilon(1e-3));

  const std::vector<double> zero(16, 0.0);
  const sd::KernelBatch dead{f.c1, f.c2, zero, 0.25, 0.25, 1.0};
  q1 = {0.0};
  q2 = {0.0};
  for (auto b : {sd::Backend::Scalar, sd::Backend::Avx2}) {
    if (!sd::backend_available(b)) continue;
    const sd::Backend before = sd::active_backend();
    sd::set_backend(b);
    sd::kde_log_sum(dead, {q1, q2}, out);
    CHECK(out[0] == -INFINITY);
    sd::set_backend(before);
  }
}

TEST_CASE("dispatched log-sum agrees with the shifted reference") {
  const Fixture f = make(300, 200, 8.0, 41);
  const sd::KernelBatch k{f.c1, f.c2, f.w, 0.25, 0.25, 1.0 / (8 * 3.141592653589793)};
  std::vector<double> a(f.q1.size()), b(f.q1.size());
  sd::scalar::kde_log_sum(k, {f.q1, f.q2}, a);
  sd::kde_log_sum(k, {f.q1, f.q2}, b);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12 * std::max(1.0, std::abs(a[i])));
}
