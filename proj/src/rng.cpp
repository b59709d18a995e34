#include "coslat/rng.hpp"

#include <cmath>
#include <numbers>

namespace coslat {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng make_stream(std::uint64_t seed, StreamTag tag, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(seed ^ mix64(static_cast<std::uint64_t>(tag)));
  for (std::uint64_t k : keys) h = mix64(h ^ (k + 0x632be59bd9b4e019ULL));
  return Rng(h);
}

std::uint64_t run_seed(std::uint64_t seed, std::uint64_t run) {
  return mix64(mix64(seed) + run);
}

// Own transforms instead of std::*_distribution so that streams reproduce
// bit for bit across standard library implementations.
double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(Rng& rng) {
  // Box-Muller, one variate per call.
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace coslat
