#include "coslat/statespace.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace coslat {
namespace {

/// Symmetric square root factor of a PSD matrix; tolerates singular blocks
/// such as zero-variance velocity components.
Mat4 psd_factor(const Mat4& cov) {
  Eigen::SelfAdjointEigenSolver<Mat4> eig(cov);
  Vec4 d = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().transpose();
}

bool is_psd(const Mat4& cov) {
  if (!cov.allFinite()) return false;
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + cov.cwiseAbs().maxCoeff())) {
    return false;
  }
  Eigen::SelfAdjointEigenSolver<Mat4> eig(cov);
  return eig.eigenvalues().minCoeff() >= -1e-12 * (1.0 + cov.cwiseAbs().maxCoeff());
}

}  // namespace

bool NodeState::finite() const {
  return std::isfinite(x1) && std::isfinite(x2) && std::isfinite(v1) && std::isfinite(v2);
}

MotionModel MotionModel::constant_velocity(double sigma_u2) {
  MotionModel m;
  m.G << 1, 0, 1, 0,
         0, 1, 0, 1,
         0, 0, 1, 0,
         0, 0, 0, 1;
  m.W << 0.5, 0.0,
         0.0, 0.5,
         1.0, 0.0,
         0.0, 1.0;
  m.sigma_u2 = sigma_u2;
  return m;
}

void MotionModel::validate() const {
  if (!G.allFinite() || !W.allFinite()) throw std::invalid_argument("motion model: non-finite G or W");
  if (!(sigma_u2 >= 0.0) || !std::isfinite(sigma_u2)) {
    throw std::invalid_argument("motion model: sigma_u2 must be finite and >= 0");
  }
}

NodeState propagate(const NodeState& state, const MotionModel& model, const Vec2& u) {
  return NodeState::from_vector(model.G * state.vector() + model.W * u);
}

Vec2 draw_driving_noise(const MotionModel& model, Rng& rng) {
  const double s = std::sqrt(model.sigma_u2);
  const double a = standard_normal(rng);
  const double b = standard_normal(rng);
  return {s * a, s * b};
}

RangeNoiseModel RangeNoiseModel::gaussian(double variance) {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw std::invalid_argument("range noise: variance must be finite and > 0");
  }
  const double inv = 1.0 / (2.0 * variance);
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * variance);
  const double sd = std::sqrt(variance);
  return RangeNoiseModel(
      variance, [=](double v) { return norm * std::exp(-v * v * inv); },
      [=](Rng& rng) { return sd * standard_normal(rng); });
}

RangeNoiseModel::RangeNoiseModel(double variance, Density density, Sampler sampler)
    : variance_(variance), density_(std::move(density)), sampler_(std::move(sampler)) {
  if (!density_ || !sampler_) throw std::invalid_argument("range noise: density and sampler required");
}

double range_measurement(const NodeState& a, const NodeState& b, double v) {
  return (a.location() - b.location()).norm() + v;
}

double range_likelihood(double y, const Vec2& a, const Vec2& b, const RangeNoiseModel& noise) {
  return noise.density(y - (a - b).norm());
}

StatePrior StatePrior::dirac(const NodeState& s) {
  StatePrior p;
  p.kind = Kind::Dirac;
  p.point = s;
  return p;
}

StatePrior StatePrior::uniform_location(double lo, double hi, const Vec2& vel_mean,
                                        const Eigen::Matrix2d& vel_cov) {
  StatePrior p;
  p.kind = Kind::UniformLocationGaussianVelocity;
  p.box_lo = lo;
  p.box_hi = hi;
  p.mean.tail<2>() = vel_mean;
  p.cov.bottomRightCorner<2, 2>() = vel_cov;
  return p;
}

StatePrior StatePrior::gaussian(const Vec4& mean, const Mat4& cov) {
  StatePrior p;
  p.kind = Kind::Gaussian;
  p.mean = mean;
  p.cov = cov;
  return p;
}

void StatePrior::validate() const {
  switch (kind) {
    case Kind::Dirac:
      if (!point.finite()) throw std::invalid_argument("dirac prior: non-finite location");
      break;
    case Kind::UniformLocationGaussianVelocity:
      if (!(box_lo < box_hi)) throw std::invalid_argument("uniform prior: empty location box");
      [[fallthrough]];
    case Kind::Gaussian:
      if (!mean.allFinite()) throw std::invalid_argument("prior: non-finite mean");
      if (!is_psd(cov)) throw std::invalid_argument("prior: covariance must be symmetric PSD");
      break;
  }
}

NodeState StatePrior::sample(Rng& rng) const {
  switch (kind) {
    case Kind::Dirac:
      return point;
    case Kind::UniformLocationGaussianVelocity: {
      const double w = box_hi - box_lo;
      const double x1 = box_lo + w * uniform01(rng);
      const double x2 = box_lo + w * uniform01(rng);
      const Eigen::Matrix2d vc = cov.bottomRightCorner<2, 2>();
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(vc);
      const Eigen::Matrix2d f = eig.eigenvectors() *
                                eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                                eig.eigenvectors().transpose();
      const double z1 = standard_normal(rng);
      const double z2 = standard_normal(rng);
      const Vec2 v = mean.tail<2>() + f * Vec2(z1, z2);
      return {x1, x2, v(0), v(1)};
    }
    case Kind::Gaussian: {
      Vec4 z;
      for (int i = 0; i < 4; ++i) z(i) = standard_normal(rng);
      return NodeState::from_vector(mean + psd_factor(cov) * z);
    }
  }
  return point;
}

}  // namespace coslat
