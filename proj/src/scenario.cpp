#include "coslat/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

namespace coslat {

ScenarioConfig ScenarioConfig::defaults(int scenario) {
  ScenarioConfig c;
  c.scenario = scenario;
  c.sensors = {
      {"upper_left", false, {5.0, 45.0}},
      {"upper_right", false, {36.0, 30.0}},
      {"lower_left", false, {16.0, 12.0}},
      {"lower_right", false, {45.0, 5.0}},
      {"anchor_a", true, {40.0, 44.0}},
      {"anchor_b", true, {22.0, 18.0}},
      {"anchor_c", true, {4.0, 16.0}},
  };
  c.restricted_scenario1 = {"upper_right"};
  c.restricted_scenario2 = {"upper_right", "lower_left"};
  return c;
}

std::size_t ScenarioConfig::index_of(const std::string& name) const {
  for (std::size_t k = 0; k < sensors.size(); ++k) {
    if (sensors[k].name == name) return k;
  }
  throw std::invalid_argument("unknown sensor '" + name + "'");
}

std::vector<std::size_t> ScenarioConfig::mobiles() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < sensors.size(); ++k) {
    if (!sensors[k].anchor) out.push_back(k);
  }
  return out;
}

std::vector<bool> ScenarioConfig::anchor_mask() const {
  std::vector<bool> out;
  for (const auto& s : sensors) out.push_back(s.anchor);
  return out;
}

std::vector<double> ScenarioConfig::radii() const {
  std::vector<double> r(sensors.size(), kUnlimited);
  for (const auto& name : scenario == 1 ? restricted_scenario1 : restricted_scenario2) {
    r[index_of(name)] = restricted_radius;
  }
  return r;
}

std::vector<StatePrior> ScenarioConfig::sensor_priors() const {
  std::vector<StatePrior> out;
  for (const auto& s : sensors) {
    if (s.anchor) {
      out.push_back(StatePrior::dirac({s.location(0), s.location(1), 0.0, 0.0}));
    } else {
      out.push_back(StatePrior::uniform_location(prior_box_lo, prior_box_hi, velocity_mean,
                                                 velocity_var.asDiagonal().toDenseMatrix()));
    }
  }
  return out;
}

StatePrior ScenarioConfig::target_prior() const {
  return StatePrior::gaussian(target_mean, target_var.asDiagonal().toDenseMatrix());
}

EngineConfig ScenarioConfig::engine(Mode mode, std::uint64_t run_seed) const {
  EngineConfig e;
  e.particles = particles;
  e.iterations = iterations;
  e.sigma_k2 = kernel_sigma2;
  e.motion = motion();
  e.noise = noise();
  e.anchor = anchor_mask();
  e.consensus = {consensus_iterations, weight_rule, exact_consensus};
  e.basis_degree = basis_degree;
  e.basis_scale = basis_scale;
  e.proposal.prediction_fraction = prediction_fraction;
  e.mode = mode;
  e.seed = run_seed;
  return e;
}

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
  if (scenario != 1 && scenario != 2) fail("scenario must be 1 or 2");
  if (sensors.size() < 2) fail("at least two sensors are required");
  for (std::size_t k = 0; k < sensors.size(); ++k) {
    if (sensors[k].name.empty()) fail("sensor " + std::to_string(k) + " has no name");
    if (!sensors[k].location.allFinite()) fail("sensor '" + sensors[k].name + "' has a non-finite location");
    for (std::size_t l = k + 1; l < sensors.size(); ++l) {
      if (sensors[k].name == sensors[l].name) fail("duplicate sensor name '" + sensors[k].name + "'");
    }
  }
  if (mobiles().empty()) fail("at least one mobile sensor is required");
  for (const auto* list : {&restricted_scenario1, &restricted_scenario2}) {
    for (const auto& name : *list) {
      if (std::none_of(sensors.begin(), sensors.end(), [&](const SensorSpec& s) { return s.name == name; })) {
        fail("restricted sensor '" + name + "' is not defined");
      }
    }
  }
  if (!(comm_range > 0.0)) fail("comm_range must be > 0");
  if (!(restricted_radius > 0.0)) fail("restricted_radius must be > 0");
  if (!(sigma_v2 > 0.0) || !std::isfinite(sigma_v2)) fail("sigma_v2 must be > 0");
  if (!(sigma_u2 >= 0.0) || !std::isfinite(sigma_u2)) fail("sigma_u2 must be >= 0");
  if (!(prior_box_lo < prior_box_hi)) fail("prior box must have lo < hi");
  if (!velocity_mean.allFinite() || !(velocity_var.array() >= 0.0).all()) fail("invalid velocity prior");
  if (!target_mean.allFinite() || !(target_var.array() >= 0.0).all()) fail("invalid target prior");
  if (steps < 1) fail("steps must be >= 1");
  if (runs < 1) fail("runs must be >= 1");
  if (!(gate_factor > 0.0)) fail("gate_factor must be > 0");
  if (!(divergence_threshold > 0.0)) fail("divergence_threshold must be > 0");
  if (particles < 1) fail("particles must be >= 1");
  if (iterations < 0) fail("iterations must be >= 0");
  if (consensus_iterations < 0) fail("consensus_iterations must be >= 0");
  if (!(kernel_sigma2 > 0.0)) fail("kernel_sigma2 must be > 0");
  if (basis_degree < 0 || basis_degree > 8) fail("basis_degree must be in 0..8");
  if (static_cast<std::size_t>((basis_degree + 1) * (basis_degree + 1)) > particles) {
    fail("particles must be at least the number of basis terms");
  }
  if (!(basis_scale > 0.0)) fail("basis_scale must be > 0");
  if (!(prediction_fraction >= 0.0 && prediction_fraction <= 1.0)) fail("prediction_fraction must be in [0, 1]");
}

Truth generate_truth(const ScenarioConfig& cfg, Rng& rng) {
  const MotionModel model = cfg.motion();
  Truth t;
  t.steps = cfg.steps;
  t.sensors.resize(cfg.sensor_count());
  for (std::size_t k = 0; k < cfg.sensor_count(); ++k) {
    const auto& s = cfg.sensors[k];
    NodeState x{s.location(0), s.location(1), 0.0, 0.0};
    if (!s.anchor) {
      x.v1 = cfg.velocity_mean(0);
      x.v2 = cfg.velocity_mean(1);
    }
    t.sensors[k].push_back(x);
    for (int n = 1; n <= cfg.steps; ++n) {
      if (!s.anchor) x = propagate(x, model, draw_driving_noise(model, rng));
      t.sensors[k].push_back(x);
    }
  }
  NodeState x = NodeState::from_vector(cfg.target_mean);
  t.target.push_back(x);
  for (int n = 1; n <= cfg.steps; ++n) {
    x = propagate(x, model, draw_driving_noise(model, rng));
    t.target.push_back(x);
  }
  return t;
}

bool gate_movement(const ParticleSet& belief, double threshold) {
  return moments(belief).location_variance_sum() < threshold;
}

MovementGate::MovementGate(std::vector<bool> anchor, double threshold)
    : released_at_(anchor.size(), -1), threshold_(threshold) {
  for (std::size_t k = 0; k < anchor.size(); ++k) {
    if (anchor[k]) released_at_[k] = 0;
  }
}

bool MovementGate::update(std::size_t k, const ParticleSet& belief, int n) {
  if (released_at_[k] < 0 && gate_movement(belief, threshold_)) released_at_[k] = n;
  return released(k);
}

std::vector<NodeState> sensor_truth_at(const Truth& truth, const MovementGate& gate, int n) {
  std::vector<NodeState> out;
  out.reserve(truth.sensors.size());
  for (std::size_t k = 0; k < truth.sensors.size(); ++k) {
    const auto& traj = truth.sensors[k];
    const int r = gate.released_at(k);
    if (r < 0 || n <= r) {
      NodeState s = traj[0];
      s.v1 = s.v2 = 0.0;
      out.push_back(s);
    } else {
      out.push_back(traj[static_cast<std::size_t>(n - r)]);
    }
  }
  return out;
}

TopologySnapshot build_topology(const std::vector<NodeState>& sensors, const NodeState& target,
                                const std::vector<double>& radii, double comm_range) {
  if (radii.size() != sensors.size()) throw std::invalid_argument("topology: one radius per sensor required");
  TopologySnapshot topo(sensors.size());
  for (std::size_t k = 0; k < sensors.size(); ++k) {
    for (std::size_t l = k + 1; l < sensors.size(); ++l) {
      const double d = (sensors[k].location() - sensors[l].location()).norm();
      if (d > comm_range) continue;
      topo.comm.add_edge(k, l);
      // A restricted sensor can neither range nor be ranged beyond its radius.
      if (d <= std::min(radii[k], radii[l])) {
        topo.measures[k].push_back(l);
        topo.measures[l].push_back(k);
      }
    }
  }
  for (auto& m : topo.measures) std::sort(m.begin(), m.end());
  for (std::size_t k = 0; k < sensors.size(); ++k) {
    topo.observes_target[k] = (sensors[k].location() - target.location()).norm() <= radii[k];
  }
  return topo;
}

namespace {

template <class NoiseFor>
MeasurementSet measure(const std::vector<NodeState>& sensors, const NodeState& target,
                       const TopologySnapshot& topo, NoiseFor&& noise_for) {
  MeasurementSet y;
  for (std::size_t k = 0; k < sensors.size(); ++k) {
    for (std::size_t l : topo.measures[k]) {
      y.add(k, static_cast<int>(l), range_measurement(sensors[k], sensors[l], noise_for(k, l)));
    }
    if (topo.observes_target[k]) {
      y.add(k, kTarget, range_measurement(sensors[k], target, noise_for(k, sensors.size())));
    }
  }
  return y;
}

}  // namespace

MeasurementSet generate_measurements(const std::vector<NodeState>& sensors, const NodeState& target,
                                     const TopologySnapshot& topo, const RangeNoiseModel& noise,
                                     std::uint64_t run_seed, int n) {
  return measure(sensors, target, topo, [&](std::size_t k, std::size_t l) {
    Rng rng = make_stream(run_seed, StreamTag::MeasurementNoise, {k, l, static_cast<std::uint64_t>(n)});
    return noise.sample(rng);
  });
}

MeasurementSet generate_measurements(const std::vector<NodeState>& sensors, const NodeState& target,
                                     const TopologySnapshot& topo, const RangeNoiseModel& noise, Rng& rng) {
  return measure(sensors, target, topo, [&](std::size_t, std::size_t) { return noise.sample(rng); });
}

void write_truth_csv(const Truth& truth, std::ostream& out) {
  out << "node_id,n,x1,x2,v1,v2\n";
  char buf[256];
  auto row = [&](std::size_t id, std::size_t n, const NodeState& s) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g,%.17g\n", id, n, s.x1, s.x2, s.v1, s.v2);
    out << buf;
  };
  for (std::size_t n = 0; n < truth.target.size(); ++n) row(0, n, truth.target[n]);
  for (std::size_t k = 0; k < truth.sensors.size(); ++k) {
    for (std::size_t n = 0; n < truth.sensors[k].size(); ++n) row(k + 1, n, truth.sensors[k][n]);
  }
}

void write_truth_csv(const Truth& truth, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_truth_csv(truth, f);
  if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

Truth read_truth_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("truth table: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "node_id,n,x1,x2,v1,v2") throw std::runtime_error("truth table: unexpected header '" + line + "'");
  std::map<std::size_t, std::map<std::size_t, NodeState>> nodes;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw std::runtime_error("truth table: row " + std::to_string(row) + " needs 6 columns");
    try {
      const std::size_t id = std::stoul(cells[0]);
      const std::size_t n = std::stoul(cells[1]);
      NodeState s{std::stod(cells[2]), std::stod(cells[3]), std::stod(cells[4]), std::stod(cells[5])};
      if (!s.finite()) throw std::invalid_argument("non-finite");
      if (!nodes[id].emplace(n, s).second) throw std::invalid_argument("duplicate");
    } catch (const std::exception&) {
      throw std::runtime_error("truth table: bad row " + std::to_string(row) + ": '" + line + "'");
    }
  }
  if (nodes.empty() || !nodes.count(0)) throw std::runtime_error("truth table: no target rows (node_id 0)");
  Truth t;
  const std::size_t count = nodes.at(0).size();
  t.steps = static_cast<int>(count) - 1;
  for (const auto& [id, series] : nodes) {
    if (series.size() != count || series.rbegin()->first != count - 1) {
      throw std::runtime_error("truth table: node " + std::to_string(id) + " does not cover n = 0.." +
                               std::to_string(count - 1));
    }
    std::vector<NodeState> v;
    for (const auto& [n, s] : series) v.push_back(s);
    if (id == 0) {
      t.target = std::move(v);
    } else {
      if (id != t.sensors.size() + 1) throw std::runtime_error("truth table: sensor ids must be consecutive");
      t.sensors.push_back(std::move(v));
    }
  }
  return t;
}

Truth read_truth_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open truth table '" + path + "'");
  return read_truth_csv(f);
}

}  // namespace coslat
