#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace coslat {

using Rng = std::mt19937_64;

/// Stream tags keep independent random streams apart when they share keys.
enum class StreamTag : std::uint64_t {
  Prior = 1,
  Prediction,
  TargetPrediction,
  Message,
  TargetMessage,
  Update,
  TargetUpdate,
  Extrinsic,
  MeasurementNoise,
  Truth,
  Test,
};

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Derives a generator from a base seed and a key tuple. The same
/// (seed, tag, keys) always yields the same stream, independent of the order
/// in which streams are created, so per-node computations can run in any
/// order or in parallel.
Rng make_stream(std::uint64_t seed, StreamTag tag, std::initializer_list<std::uint64_t> keys = {});

/// Seed of Monte Carlo run `run` derived from the experiment seed.
std::uint64_t run_seed(std::uint64_t seed, std::uint64_t run);

double standard_normal(Rng& rng);
double uniform01(Rng& rng);

}  // namespace coslat
