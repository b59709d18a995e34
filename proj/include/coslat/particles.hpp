#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "coslat/rng.hpp"
#include "coslat/statespace.hpp"

namespace coslat {

/// Raised when a weight vector has no positive mass left to normalize.
class DegenerateWeights : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// J weighted samples over a 2D location or a 4D state. Coordinates are kept
/// structure-of-arrays (one contiguous column per dimension) so density
/// kernels can stream over them.
class ParticleSet {
 public:
  ParticleSet() = default;
  /// count particles at the origin with equal weights.
  ParticleSet(int dim, std::size_t count);

  static ParticleSet from_states(std::span<const NodeState> states);
  static ParticleSet from_locations(std::span<const Vec2> locations);

  int dim() const { return dim_; }
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }

  std::span<double> coord(int d) { return {coords_.data() + d * count_, count_}; }
  std::span<const double> coord(int d) const { return {coords_.data() + d * count_, count_}; }
  std::span<double> weights() { return weights_; }
  std::span<const double> weights() const { return weights_; }

  /// Velocity is zero for 2D sets.
  NodeState state(std::size_t j) const;
  void set_state(std::size_t j, const NodeState& s);
  Vec2 location(std::size_t j) const { return {coords_[j], coords_[count_ + j]}; }

  void set_equal_weights();
  /// Scales weights to sum 1; throws DegenerateWeights on zero or non-finite mass.
  void normalize();
  bool finite() const;

  const std::vector<double>& raw_coords() const { return coords_; }
  bool operator==(const ParticleSet&) const = default;

 private:
  int dim_ = 2;
  std::size_t count_ = 0;
  std::vector<double> coords_;
  std::vector<double> weights_;
};

/// Gaussian-kernel density over 2D location:
///   m(x) = sum_j w_j (2 pi sigma_k2)^-1 exp(-|x - x_j|^2 / (2 sigma_k2)).
struct KernelMessage {
  std::vector<double> c1;
  std::vector<double> c2;
  std::vector<double> weights;
  double sigma_k2 = 1.0;

  static KernelMessage from_particles(const ParticleSet& p, double sigma_k2);
  std::size_t size() const { return c1.size(); }
  void validate() const;
};

double kde_evaluate(const KernelMessage& msg, const Vec2& query);
void kde_evaluate(const KernelMessage& msg, std::span<const double> q1, std::span<const double> q2,
                  std::span<double> out);
/// log m(x), finite wherever any kernel has positive weight.
void kde_log_evaluate(const KernelMessage& msg, std::span<const double> q1, std::span<const double> q2,
                      std::span<double> out);

enum class BandwidthRule { Fixed, Silverman };

/// Diagonal-bandwidth Gaussian density over the location part of a particle
/// set. Used for prediction-message densities, where the fixed measurement
/// bandwidth is not appropriate.
struct LocationDensity {
  std::vector<double> c1;
  std::vector<double> c2;
  std::vector<double> weights;
  Vec2 bandwidth{1.0, 1.0};  // per-axis standard deviation

  static LocationDensity from_particles(const ParticleSet& p, BandwidthRule rule, double fixed_sigma2 = 1.0);
  void evaluate(std::span<const double> q1, std::span<const double> q2, std::span<double> out) const;
};

/// Per-axis rule-of-thumb bandwidth for the location part: h_d = s_d J^(-1/6)
/// with weighted standard deviations s_d (floored at min_sigma).
Vec2 silverman_bandwidth(const ParticleSet& p, double min_sigma = 1e-3);

/// Systematic resampling to j_out equally weighted particles.
ParticleSet resample(const ParticleSet& p, std::size_t j_out, Rng& rng);
/// The source indices systematic resampling picks for unnormalized weights w.
std::vector<std::size_t> resample_indices(std::span<const double> w, std::size_t j_out, Rng& rng);

/// Multiplies weights by f(particle) and renormalizes.
ParticleSet importance_weight(const ParticleSet& p, const std::function<double(const NodeState&)>& f);
/// Multiplies weights by exp(log_factors - max) and renormalizes. -inf marks
/// zero factors; all -inf throws DegenerateWeights.
void reweight_log(ParticleSet& p, std::span<const double> log_factors);

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  /// Sum of the two location-coordinate variances.
  double location_variance_sum() const { return cov(0, 0) + cov(1, 1); }
  Vec2 location_mean() const { return {mean(0), mean(1)}; }
};

Moments moments(const ParticleSet& p);

}  // namespace coslat
