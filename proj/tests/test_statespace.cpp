#include <doctest.h>

#include <cmath>
#include <numbers>

#include "coslat/statespace.hpp"

using namespace coslat;

TEST_CASE("propagate fixed points and constant-velocity advance") {
  const MotionModel m = MotionModel::constant_velocity(0.0005);
  CHECK(propagate({0, 0, 0, 0}, m, {0, 0}) == NodeState{0, 0, 0, 0});
  CHECK(propagate({0, 0, 1, 0}, m, {0, 0}) == NodeState{1, 0, 1, 0});
}

TEST_CASE("propagate matches a hand-written matrix product") {
  const MotionModel m = MotionModel::constant_velocity(0.0005);
  const double s = std::sqrt(0.0005);
  const NodeState out = propagate({2, 3, 0, 0}, m, {s, s});
  // G x = (2, 3, 0, 0); W u = (s/2, s/2, s, s).
  CHECK(out.x1 == doctest::Approx(2 + 0.5 * s).epsilon(1e-15));
  CHECK(out.x2 == doctest::Approx(3 + 0.5 * s).epsilon(1e-15));
  CHECK(out.v1 == doctest::Approx(s).epsilon(1e-15));
  CHECK(out.v2 == doctest::Approx(s).epsilon(1e-15));

  const NodeState moving = propagate({1, -2, 0.3, -0.7}, m, {0.1, 0.2});
  CHECK(moving.x1 == doctest::Approx(1 + 0.3 + 0.05));
  CHECK(moving.x2 == doctest::Approx(-2 - 0.7 + 0.1));
  CHECK(moving.v1 == doctest::Approx(0.4));
  CHECK(moving.v2 == doctest::Approx(-0.5));
}

TEST_CASE("propagate is linear without noise") {
  const MotionModel m = MotionModel::constant_velocity(0.0005);
  Rng rng = make_stream(5, StreamTag::Test);
  for (int t = 0; t < 50; ++t) {
    const Vec4 x = Vec4::Random() * 10;
    const Vec4 z = Vec4::Random() * 10;
    const double a = standard_normal(rng);
    const double b = standard_normal(rng);
    const Vec4 lhs = propagate(NodeState::from_vector(a * x + b * z), m, {0, 0}).vector();
    const Vec4 rhs = a * propagate(NodeState::from_vector(x), m, {0, 0}).vector() +
                     b * propagate(NodeState::from_vector(z), m, {0, 0}).vector();
    CHECK((lhs - rhs).norm() < 1e-12);
  }
  const NodeState still = propagate({7.5, -3.25, 0, 0}, m, {0, 0});
  CHECK(still.location() == Vec2(7.5, -3.25));
}

TEST_CASE("motion model validation") {
  MotionModel m = MotionModel::constant_velocity(0.0);
  CHECK_NOTHROW(m.validate());
  m.sigma_u2 = -1;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  m = MotionModel::constant_velocity(0.1);
  m.G(0, 0) = std::nan("");
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}

TEST_CASE("range measurement") {
  CHECK(range_measurement({0, 0, 0, 0}, {3, 4, 0, 0}, 0.0) == 5.0);
  CHECK(range_measurement({2, 2, 0, 0}, {2, 2, 0, 0}, 0.0) == 0.0);
  CHECK(range_measurement({1, 1, 0, 0}, {4, 5, 0, 0}, 0.5) == 5.5);
  Rng rng = make_stream(9, StreamTag::Test);
  for (int t = 0; t < 20; ++t) {
    const NodeState a{10 * standard_normal(rng), 10 * standard_normal(rng), 0, 0};
    const NodeState b{10 * standard_normal(rng), 10 * standard_normal(rng), 1, 1};
    CHECK(range_measurement(a, b, 0.3) == range_measurement(b, a, 0.3));
  }
}

TEST_CASE("range likelihood values") {
  const RangeNoiseModel g = RangeNoiseModel::gaussian(2.0);
  const Vec2 a(0, 0), b(3, 4);
  CHECK(range_likelihood(5.0, a, b, g) == doctest::Approx(1.0 / std::sqrt(4 * std::numbers::pi)).epsilon(1e-14));
  CHECK(range_likelihood(5.7, a, b, g) == doctest::Approx(range_likelihood(4.3, a, b, g)).epsilon(1e-14));
  for (double y = -2.0; y <= 12.0; y += 0.25) {
    const double d = y - 5.0;
    const double oracle = std::exp(-d * d / 4.0) / std::sqrt(2 * std::numbers::pi * 2.0);
    CHECK(std::abs(range_likelihood(y, a, b, g) - oracle) <= 1e-12 * std::max(oracle, 1e-300));
  }
}

TEST_CASE("range likelihood is invariant under rigid motions") {
  const RangeNoiseModel g = RangeNoiseModel::gaussian(2.0);
  Rng rng = make_stream(11, StreamTag::Test);
  for (int t = 0; t < 30; ++t) {
    const Vec2 a(20 * uniform01(rng), 20 * uniform01(rng));
    const Vec2 b(20 * uniform01(rng), 20 * uniform01(rng));
    const double th = 2 * std::numbers::pi * uniform01(rng);
    const Eigen::Matrix2d r{{std::cos(th), -std::sin(th)}, {std::sin(th), std::cos(th)}};
    const Vec2 shift(50 * standard_normal(rng), 50 * standard_normal(rng));
    const double y = (a - b).norm() + standard_normal(rng);
    CHECK(range_likelihood(y, r * a + shift, r * b + shift, g) ==
          doctest::Approx(range_likelihood(y, a, b, g)).epsilon(1e-10));
  }
}

TEST_CASE("gaussian noise density integrates to one and sampler variance matches") {
  const RangeNoiseModel g = RangeNoiseModel::gaussian(2.0);
  double total = 0.0;
  const double h = 0.01;
  for (double v = -20.0; v <= 20.0; v += h) total += g.density(v) * h;
  CHECK(total == doctest::Approx(1.0).epsilon(0.01));

  Rng rng = make_stream(13, StreamTag::Test);
  const int n = 20000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double v = g.sample(rng);
    s += v;
    s2 += v * v;
  }
  const double var = s2 / n - (s / n) * (s / n);
  // Standard error of a normal sample variance: sigma^2 sqrt(2 / n).
  CHECK(std::abs(var - 2.0) < 3 * 2.0 * std::sqrt(2.0 / n));
  CHECK_THROWS_AS(RangeNoiseModel::gaussian(0.0), std::invalid_argument);
}

TEST_CASE("priors") {
  const StatePrior d = StatePrior::dirac({4, 16, 0, 0});
  Rng rng = make_stream(17, StreamTag::Test);
  CHECK(d.sample(rng) == NodeState{4, 16, 0, 0});

  const StatePrior u = StatePrior::uniform_location(-500, 500, {-0.1, -0.1}, Eigen::Matrix2d::Identity() * 0.1);
  CHECK_NOTHROW(u.validate());
  for (int i = 0; i < 1000; ++i) {
    const NodeState s = u.sample(rng);
    CHECK(s.finite());
    CHECK(std::abs(s.x1) <= 500);
    CHECK(std::abs(s.x2) <= 500);
  }

  Mat4 bad = Mat4::Identity();
  bad(0, 1) = 2.0;
  CHECK_THROWS_AS(StatePrior::gaussian(Vec4::Zero(), bad).validate(), std::invalid_argument);
  CHECK_THROWS_AS(StatePrior::gaussian(Vec4::Zero(), -Mat4::Identity()).validate(), std::invalid_argument);
  CHECK_THROWS_AS(StatePrior::uniform_location(5, 5, {0, 0}, Eigen::Matrix2d::Identity()).validate(),
                  std::invalid_argument);
}

TEST_CASE("gaussian prior sample moments") {
  const Vec4 mean(0, 5, 0.4, 0.4);
  const Vec4 var(1, 1, 0.001, 0.001);
  const StatePrior p = StatePrior::gaussian(mean, var.asDiagonal().toDenseMatrix());
  Rng rng = make_stream(19, StreamTag::Test);
  const int n = 20000;
  Vec4 s = Vec4::Zero();
  for (int i = 0; i < n; ++i) s += p.sample(rng).vector();
  s /= n;
  for (int d = 0; d < 4; ++d) CHECK(std::abs(s(d) - mean(d)) < 4 * std::sqrt(var(d) / n));
}

TEST_CASE("node state finiteness") {
  CHECK(NodeState{1, 2, 3, 4}.finite());
  CHECK_FALSE(NodeState{1, std::nan(""), 3, 4}.finite());
  CHECK_FALSE(NodeState{1, 2, INFINITY, 4}.finite());
}
