#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>

#include "coslat/rng.hpp"

namespace coslat {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;
using Mat42 = Eigen::Matrix<double, 4, 2>;

/// Planar kinematic state [x1, x2, v1, v2]; positions in m, velocities in m/step.
struct NodeState {
  double x1 = 0.0;
  double x2 = 0.0;
  double v1 = 0.0;
  double v2 = 0.0;

  Vec2 location() const { return {x1, x2}; }
  Vec4 vector() const { return {x1, x2, v1, v2}; }
  static NodeState from_vector(const Vec4& v) { return {v(0), v(1), v(2), v(3)}; }
  bool finite() const;
  bool operator==(const NodeState&) const = default;
};

/// x_n = G x_{n-1} + W u_n with u_n ~ N(0, sigma_u2 I).
struct MotionModel {
  Mat4 G = Mat4::Identity();
  Mat42 W = Mat42::Zero();
  double sigma_u2 = 0.0;

  /// Constant-velocity model with unit time step.
  static MotionModel constant_velocity(double sigma_u2);
  /// Throws std::invalid_argument on non-finite entries or negative variance.
  void validate() const;
};

NodeState propagate(const NodeState& state, const MotionModel& model, const Vec2& u);
Vec2 draw_driving_noise(const MotionModel& model, Rng& rng);

/// Additive range-noise model. The density and the sampler are pluggable; the
/// default is the zero-mean Gaussian.
class RangeNoiseModel {
 public:
  using Density = std::function<double(double)>;
  using Sampler = std::function<double(Rng&)>;

  static RangeNoiseModel gaussian(double variance);
  RangeNoiseModel(double variance, Density density, Sampler sampler);

  double variance() const { return variance_; }
  double density(double v) const { return density_(v); }
  double sample(Rng& rng) const { return sampler_(rng); }

 private:
  double variance_;
  Density density_;
  Sampler sampler_;
};

/// ||a - b|| + v, on the location parts.
double range_measurement(const NodeState& a, const NodeState& b, double v);
/// Noise density at y - ||a - b||.
double range_likelihood(double y, const Vec2& a, const Vec2& b, const RangeNoiseModel& noise);

/// Initial-state distribution of a node.
struct StatePrior {
  enum class Kind { Dirac, UniformLocationGaussianVelocity, Gaussian };

  Kind kind = Kind::Dirac;
  NodeState point;           // Dirac
  double box_lo = -500.0;    // uniform location on [box_lo, box_hi]^2
  double box_hi = 500.0;
  Vec4 mean = Vec4::Zero();  // Gaussian: full state; uniform: velocity part in (2, 3)
  Mat4 cov = Mat4::Zero();

  static StatePrior dirac(const NodeState& s);
  static StatePrior uniform_location(double lo, double hi, const Vec2& vel_mean, const Eigen::Matrix2d& vel_cov);
  static StatePrior gaussian(const Vec4& mean, const Mat4& cov);

  void validate() const;
  NodeState sample(Rng& rng) const;
};

}  // namespace coslat
