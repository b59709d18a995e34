#include <doctest.h>

#include <cmath>
#include <sstream>

#include "coslat/scenario.hpp"

using namespace coslat;

namespace {

std::vector<NodeState> at_rest(const std::vector<Vec2>& pts) {
  std::vector<NodeState> s;
  for (const auto& p : pts) s.push_back({p(0), p(1), 0, 0});
  return s;
}

std::vector<NodeState> layout_states(const ScenarioConfig& cfg) {
  std::vector<Vec2> pts;
  for (const auto& s : cfg.sensors) pts.push_back(s.location);
  return at_rest(pts);
}

// Four points on the axes: per-axis variance a^2 / 2, no sampling error.
ParticleSet cross(double per_axis_var) {
  const double a = std::sqrt(2 * per_axis_var);
  const std::vector<Vec2> pts{{a, 0}, {-a, 0}, {0, a}, {0, -a}};
  return ParticleSet::from_locations(pts);
}

}  // namespace

TEST_CASE("topology thresholds are inclusive") {
  const auto s = at_rest({{0, 0}, {56, 0}, {56.0001, 0.0}});
  const NodeState target{0, 25, 0, 0};
  const TopologySnapshot t = build_topology({s[0], s[1]}, target, {kUnlimited, kUnlimited}, 56.0);
  CHECK(t.comm.connected(0, 1));
  CHECK(t.measures[0] == std::vector<std::size_t>{1});
  const TopologySnapshot far = build_topology({s[0], s[2]}, target, {kUnlimited, kUnlimited}, 56.0);
  CHECK_FALSE(far.comm.connected(0, 1));
  CHECK(far.measures[0].empty());
}

TEST_CASE("restricted radius limits target observation and ranging") {
  const auto s = at_rest({{0, 0}, {15, 0}, {30, 0}});
  const NodeState target{0, 25, 0, 0};
  const TopologySnapshot t = build_topology(s, target, {20.0, kUnlimited, kUnlimited}, 56.0);
  CHECK_FALSE(t.observes_target[0]);
  CHECK(t.observes_target[1]);
  CHECK(t.target_observers() == std::vector<std::size_t>{1, 2});
  // 0 and 2 communicate but 30 m exceeds the restricted radius of 0, on both ends.
  CHECK(t.comm.connected(0, 2));
  CHECK(t.measures[0] == std::vector<std::size_t>{1});
  CHECK(t.measures[2] == std::vector<std::size_t>{1});
  CHECK(t.measures[1] == std::vector<std::size_t>{0, 2});
  t.validate();
}

TEST_CASE("default layout leaves the upper-right sensor short of partners") {
  for (int sc : {1, 2}) {
    const ScenarioConfig cfg = ScenarioConfig::defaults(sc);
    cfg.validate();
    CHECK(cfg.sensor_count() == 7);
    CHECK(cfg.mobiles().size() == 4);
    const TopologySnapshot t =
        build_topology(layout_states(cfg), NodeState::from_vector(cfg.target_mean), cfg.radii(), cfg.comm_range);
    CHECK(t.comm.is_connected());
    CHECK(t.measures[cfg.index_of("upper_right")].size() < 3);
    for (std::size_t k = 0; k < cfg.sensor_count(); ++k) {
      for (std::size_t l : t.measures[k]) {
        CHECK(t.comm.connected(k, l));
        CHECK(std::count(t.measures[l].begin(), t.measures[l].end(), k) == 1);
      }
    }
  }
  CHECK(ScenarioConfig::defaults(1).radii()[ScenarioConfig::defaults(1).index_of("lower_left")] == kUnlimited);
  CHECK(ScenarioConfig::defaults(2).radii()[ScenarioConfig::defaults(2).index_of("lower_left")] == 20.0);
}

TEST_CASE("truth without driving noise is static") {
  ScenarioConfig cfg = ScenarioConfig::defaults(2);
  cfg.sigma_u2 = 0.0;
  cfg.velocity_mean = {0, 0};
  cfg.target_mean = {0, 5, 0, 0};
  Rng rng = make_stream(70, StreamTag::Test);
  const Truth t = generate_truth(cfg, rng);
  REQUIRE(t.target.size() == 76);
  for (const auto& x : t.target) CHECK(x == t.target[0]);
  for (const auto& traj : t.sensors) {
    REQUIRE(traj.size() == 76);
    for (const auto& x : traj) CHECK(x == traj[0]);
  }
}

TEST_CASE("truth: anchors fixed, target drifts at its initial speed") {
  const ScenarioConfig cfg = ScenarioConfig::defaults(2);
  Rng rng = make_stream(71, StreamTag::Test);
  const Truth t = generate_truth(cfg, rng);
  for (std::size_t k = 0; k < cfg.sensor_count(); ++k) {
    CHECK(t.sensors[k][0].location() == cfg.sensors[k].location);
    if (!cfg.sensors[k].anchor) continue;
    for (const auto& x : t.sensors[k]) CHECK(x == t.sensors[k][0]);
  }
  // Position variance after N steps: sigma_u2 * sum_i (N - i + 1/2)^2, from the
  // columns of G^(N-i) W.
  const int N = cfg.steps;
  double var = 0;
  for (int i = 1; i <= N; ++i) var += (N - i + 0.5) * (N - i + 0.5);
  var *= cfg.sigma_u2;
  const Vec2 moved = t.target[N].location() - t.target[0].location();
  CHECK(std::abs(moved(0) - 0.4 * N) < 3 * std::sqrt(var));
  CHECK(std::abs(moved(1) - 0.4 * N) < 3 * std::sqrt(var));
  CHECK(std::abs(moved.norm() - N * Vec2(0.4, 0.4).norm()) < 3 * std::sqrt(2 * var));

  Rng again = make_stream(71, StreamTag::Test);
  CHECK(generate_truth(cfg, again) == t);
}

TEST_CASE("movement gating") {
  const double threshold = 5 * 2.0;
  const NodeState one[] = {{3, 4, 0, 0}};
  CHECK(gate_movement(ParticleSet::from_states(one), threshold));

  Rng rng = make_stream(72, StreamTag::Test);
  const StatePrior wide = ScenarioConfig::defaults().sensor_priors()[0];
  ParticleSet uniform(4, 500);
  for (std::size_t j = 0; j < 500; ++j) uniform.set_state(j, wide.sample(rng));
  CHECK(moments(uniform).location_variance_sum() > 1e5);
  CHECK_FALSE(gate_movement(uniform, threshold));

  CHECK(moments(cross(4.9)).location_variance_sum() == doctest::Approx(9.8));
  CHECK(gate_movement(cross(4.9), threshold));
  CHECK_FALSE(gate_movement(cross(5.1), threshold));

  MovementGate gate({false, false, true}, threshold);
  CHECK(gate.released(2));
  CHECK(gate.released_at(2) == 0);
  CHECK_FALSE(gate.update(0, uniform, 1));
  CHECK(gate.update(0, cross(1.0), 4));
  CHECK(gate.update(0, uniform, 5));
  CHECK(gate.released_at(0) == 4);
  CHECK_FALSE(gate.released(1));
}

TEST_CASE("frozen sensors hold still and resume their trajectory on release") {
  const ScenarioConfig cfg = ScenarioConfig::defaults(1);
  Rng rng = make_stream(73, StreamTag::Test);
  const Truth t = generate_truth(cfg, rng);
  MovementGate gate(cfg.anchor_mask(), 10.0);
  const std::size_t k = 0;
  for (int n = 0; n <= 6; ++n) {
    const NodeState s = sensor_truth_at(t, gate, n)[k];
    CHECK(s.location() == t.sensors[k][0].location());
    CHECK(s.v1 == 0.0);
    CHECK(s.v2 == 0.0);
  }
  gate.update(k, cross(1.0), 6);
  CHECK(sensor_truth_at(t, gate, 6)[k].location() == t.sensors[k][0].location());
  for (int n = 7; n <= 20; ++n) CHECK(sensor_truth_at(t, gate, n)[k] == t.sensors[k][n - 6]);
  const std::size_t a = cfg.index_of("anchor_a");
  CHECK(sensor_truth_at(t, gate, 20)[a] == t.sensors[a][0]);
}

TEST_CASE("measurements") {
  const auto s = at_rest({{0, 0}, {3, 4}, {20, 0}});
  const NodeState target{0, 10, 0, 0};
  const RangeNoiseModel noise = RangeNoiseModel::gaussian(2.0);

  SUBCASE("no links give no measurements") {
    TopologySnapshot empty(3);
    CHECK(generate_measurements(s, target, empty, noise, 5, 1).empty());
  }
  SUBCASE("vanishing noise gives the true distances") {
    const TopologySnapshot t = build_topology(s, target, {kUnlimited, kUnlimited, 12.0}, 56.0);
    const MeasurementSet y = generate_measurements(s, target, t, RangeNoiseModel::gaussian(1e-14), 5, 1);
    // Sensor 2 (radius 12) ranges nobody; 0-1 both ways plus two target ranges.
    CHECK(y.size() == 4);
    CHECK(y.find(0, 1).value() == doctest::Approx(5.0).epsilon(1e-6));
    CHECK(y.find(1, 0).value() == doctest::Approx(5.0).epsilon(1e-6));
    CHECK_FALSE(y.find(2, 0).has_value());
    CHECK(y.find(0, kTarget).value() == doctest::Approx(10.0).epsilon(1e-6));
    CHECK_FALSE(y.find(2, kTarget).has_value());
    // Every target measurement belongs to a sensor of T_n and vice versa.
    for (std::size_t k = 0; k < 3; ++k) CHECK(y.find(k, kTarget).has_value() == t.observes_target[k]);
  }
  SUBCASE("noise variance") {
    const auto pair = at_rest({{0, 0}, {30, 40}});
    const TopologySnapshot t = build_topology(pair, target, {kUnlimited, kUnlimited}, 56.0);
    double sum = 0, sq = 0;
    const int draws = 10000;
    for (int n = 0; n < draws; ++n) {
      const double e = generate_measurements(pair, target, t, noise, 9, n).find(0, 1).value() - 50.0;
      sum += e;
      sq += e * e;
    }
    const double var = (sq - sum * sum / draws) / (draws - 1);
    CHECK(var == doctest::Approx(2.0).epsilon(0.05));
  }
  SUBCASE("keyed noise repeats per link and step") {
    const TopologySnapshot t = build_topology(s, target, {kUnlimited, kUnlimited, kUnlimited}, 56.0);
    const MeasurementSet a = generate_measurements(s, target, t, noise, 5, 3);
    const MeasurementSet b = generate_measurements(s, target, t, noise, 5, 3);
    const MeasurementSet c = generate_measurements(s, target, t, noise, 5, 4);
    CHECK(a.find(0, 2).value() == b.find(0, 2).value());
    CHECK(a.find(0, 2).value() != c.find(0, 2).value());
    CHECK(a.find(0, 2).value() != a.find(2, 0).value());
  }
}

TEST_CASE("truth table round trip and errors") {
  const ScenarioConfig cfg = ScenarioConfig::defaults(2);
  Rng rng = make_stream(74, StreamTag::Test);
  const Truth t = generate_truth(cfg, rng);
  std::stringstream ss;
  write_truth_csv(t, ss);
  const std::string text = ss.str();
  CHECK(text.rfind("node_id,n,x1,x2,v1,v2\n", 0) == 0);
  CHECK(text.find('\r') == std::string::npos);
  std::istringstream in(text);
  CHECK(read_truth_csv(in) == t);

  auto fails = [](const std::string& s) {
    std::istringstream in(s);
    CHECK_THROWS_AS(read_truth_csv(in), std::runtime_error);
  };
  fails("");
  fails("id,n,x1,x2,v1,v2\n0,0,0,0,0,0\n");
  fails("node_id,n,x1,x2,v1,v2\n");
  fails("node_id,n,x1,x2,v1,v2\n0,0,0,0,0\n");
  fails("node_id,n,x1,x2,v1,v2\n0,0,0,0,0,abc\n");
  fails("node_id,n,x1,x2,v1,v2\n0,0,0,0,0,0\n0,0,1,1,0,0\n");
  fails("node_id,n,x1,x2,v1,v2\n0,0,0,0,0,0\n0,1,0,0,0,0\n1,0,0,0,0,0\n");
  fails("node_id,n,x1,x2,v1,v2\n0,0,0,0,0,0\n2,0,0,0,0,0\n");
  fails("node_id,n,x1,x2,v1,v2\n1,0,0,0,0,0\n");
  try {
    std::istringstream bad("node_id,n,x1,x2,v1,v2\n0,0,0,0,0,0\n0,1,x,0,0,0\n");
    read_truth_csv(bad);
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
  CHECK_THROWS(read_truth_csv(std::string("/nonexistent/truth.csv")));
}
