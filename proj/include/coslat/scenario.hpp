#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "coslat/consensusnet.hpp"
#include "coslat/msgpass.hpp"
#include "coslat/particles.hpp"
#include "coslat/statespace.hpp"
#include "coslat/topology.hpp"

namespace coslat {

inline constexpr double kUnlimited = std::numeric_limits<double>::infinity();

struct SensorSpec {
  std::string name;
  bool anchor = false;
  Vec2 location = Vec2::Zero();
};

/// Everything that defines an experiment. Sensor indices follow the order of
/// `sensors`.
struct ScenarioConfig {
  int scenario = 2;
  std::vector<SensorSpec> sensors;
  /// Names of the sensors limited to restricted_radius, per scenario id.
  std::vector<std::string> restricted_scenario1;
  std::vector<std::string> restricted_scenario2;
  double comm_range = 56.0;
  double restricted_radius = 20.0;

  double sigma_v2 = 2.0;
  double sigma_u2 = 0.0005;
  double prior_box_lo = -500.0;
  double prior_box_hi = 500.0;
  Vec2 velocity_mean{-0.1, -0.1};
  Vec2 velocity_var{0.1, 0.1};
  Vec4 target_mean{0.0, 5.0, 0.4, 0.4};
  Vec4 target_var{1.0, 1.0, 0.001, 0.001};

  int steps = 75;
  int runs = 50;
  std::uint64_t seed = 1;
  /// Seed of the single truth realization shared by all runs.
  std::uint64_t truth_seed = 2;
  double gate_factor = 5.0;  // release when location-variance sum < gate_factor * sigma_v2
  double divergence_threshold = 50.0;

  std::size_t particles = 500;
  int iterations = 3;
  int consensus_iterations = 5;
  WeightRule weight_rule = WeightRule::Metropolis;
  bool exact_consensus = false;
  double kernel_sigma2 = 2.0;
  int basis_degree = 3;
  double basis_scale = 10.0;
  double prediction_fraction = 0.5;

  static ScenarioConfig defaults(int scenario = 2);

  std::size_t sensor_count() const { return sensors.size(); }
  std::size_t index_of(const std::string& name) const;
  std::vector<std::size_t> mobiles() const;
  std::vector<bool> anchor_mask() const;
  /// Measurement (and target-observation) radius of every sensor for the
  /// configured scenario id.
  std::vector<double> radii() const;
  std::vector<StatePrior> sensor_priors() const;
  StatePrior target_prior() const;
  MotionModel motion() const { return MotionModel::constant_velocity(sigma_u2); }
  RangeNoiseModel noise() const { return RangeNoiseModel::gaussian(sigma_v2); }
  EngineConfig engine(Mode mode, std::uint64_t run_seed) const;

  /// Throws std::invalid_argument describing the first problem found.
  void validate() const;
};

/// Noise-free-start trajectory realization of every node for n = 0..steps.
/// Mobile sensor trajectories are stored as if released at n = 0; gating
/// shifts them in time.
struct Truth {
  int steps = 0;
  std::vector<std::vector<NodeState>> sensors;  // [k][n]
  std::vector<NodeState> target;                // [n]

  bool operator==(const Truth&) const = default;
};

Truth generate_truth(const ScenarioConfig& cfg, Rng& rng);

/// Latched movement gate of the mobile sensors of one (run, method).
class MovementGate {
 public:
  MovementGate(std::vector<bool> anchor, double threshold);
  /// Checks the belief after step n; returns the latched state.
  bool update(std::size_t k, const ParticleSet& belief, int n);
  bool released(std::size_t k) const { return released_at_[k] >= 0; }
  /// Step after which the sensor was released, -1 while frozen.
  int released_at(std::size_t k) const { return released_at_[k]; }
  double threshold() const { return threshold_; }

 private:
  std::vector<int> released_at_;
  double threshold_;
};

/// True when the location-variance sum of the belief is below threshold.
bool gate_movement(const ParticleSet& belief, double threshold);

/// Sensor states at step n given the release steps: a sensor released after
/// step r sits at its start until n = r and follows traj[n - r] afterwards.
std::vector<NodeState> sensor_truth_at(const Truth& truth, const MovementGate& gate, int n);

TopologySnapshot build_topology(const std::vector<NodeState>& sensors, const NodeState& target,
                                const std::vector<double>& radii, double comm_range);

/// One measurement per link of the snapshot. The noise of y_{k,l;n} is drawn
/// from a stream keyed by (run seed, k, l, n), so every method sees the same
/// noise sample for the same link.
MeasurementSet generate_measurements(const std::vector<NodeState>& sensors, const NodeState& target,
                                     const TopologySnapshot& topo, const RangeNoiseModel& noise,
                                     std::uint64_t run_seed, int n);
/// Variant drawing all noise from one generator in link order.
MeasurementSet generate_measurements(const std::vector<NodeState>& sensors, const NodeState& target,
                                     const TopologySnapshot& topo, const RangeNoiseModel& noise, Rng& rng);

/// Truth table with columns node_id,n,x1,x2,v1,v2; node 0 is the target and
/// sensor k is node k + 1.
void write_truth_csv(const Truth& truth, std::ostream& out);
void write_truth_csv(const Truth& truth, const std::string& path);
Truth read_truth_csv(std::istream& in);
Truth read_truth_csv(const std::string& path);

}  // namespace coslat
