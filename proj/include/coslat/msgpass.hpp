#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "coslat/lconsensus.hpp"
#include "coslat/particles.hpp"
#include "coslat/statespace.hpp"
#include "coslat/topology.hpp"

namespace coslat {

/// How the target belief is formed.
///  - DistributedLc: likelihood consensus over the communication graph.
///  - Centralized: direct product of the sensors' target messages (oracle).
///  - ExactExtrinsic: likelihood consensus, and sensor<->target messages built
///    from extrinsic information instead of the full beliefs.
enum class Mode { DistributedLc, Centralized, ExactExtrinsic };

struct Belief {
  int owner = 0;  // sensor index, or kTarget
  int iteration = 0;
  ParticleSet particles;
};

struct PredictionMessage {
  int owner = 0;
  ParticleSet particles;  // equal weights
};

struct MeasurementMessage {
  int from = 0;
  int to = 0;
  ParticleSet particles;  // 2D locations of the receiver, equal weights
  KernelMessage kernel;
};

/// Proposal used for sensor beliefs: a defensive mixture of the smoothed
/// prediction and the incoming messages. With prediction_fraction = 1 the
/// update is plain importance weighting of the prediction particles.
/// Batches of J draws are added until the pooled effective sample size
/// reaches min_ess_fraction * J or max_batches is hit.
struct ProposalConfig {
  double prediction_fraction = 0.5;
  double min_ess_fraction = 0.1;
  int max_batches = 16;
};

struct EngineConfig {
  std::size_t particles = 500;
  int iterations = 3;
  double sigma_k2 = 2.0;
  MotionModel motion = MotionModel::constant_velocity(0.0005);
  RangeNoiseModel noise = RangeNoiseModel::gaussian(2.0);
  std::vector<bool> anchor;  // per sensor
  ConsensusConfig consensus;
  /// Basis degree and scale; the center follows the noise-free propagated
  /// target prior mean so that it is known at every sensor without exchange.
  int basis_degree = 3;
  double basis_scale = 10.0;
  FitOptions fit;
  ProposalConfig proposal;
  Mode mode = Mode::DistributedLc;
  /// False runs pure cooperative self-localization (no target node at all).
  bool track_target = true;
  std::uint64_t seed = 1;
};

/// Beliefs at the end of a time step.
struct NetworkState {
  int n = 0;
  std::vector<ParticleSet> sensors;  // anchors hold a single Dirac particle
  std::vector<ParticleSet> target;   // each sensor's local copy of the target belief
  Vec4 target_reference = Vec4::Zero();
};

struct StepReport {
  std::size_t degenerate_sensor_updates = 0;
  std::size_t degenerate_target_updates = 0;
  std::size_t fit_failures = 0;
  std::size_t ring_redraws = 0;
  /// Hash of every prediction particle array as used at each iteration p.
  std::vector<std::vector<std::uint64_t>> prediction_hashes;
  /// Target beliefs (sensor 0's copy) after each iteration p = 1..P.
  std::vector<ParticleSet> target_per_iteration;
};

/// Initial beliefs: J draws from each mobile prior, a single particle for
/// Dirac priors, and identical target copies drawn from a common stream.
NetworkState initial_state(std::span<const StatePrior> sensor_priors, const StatePrior& target_prior,
                           const EngineConfig& cfg);

/// Propagates every particle through the motion model with a fresh noise
/// draw. Anchors (Dirac) pass through unchanged. Unequal input weights are
/// resampled first.
PredictionMessage prediction_message(const Belief& prev, const MotionModel& model, bool anchor, Rng& rng);
ParticleSet predict_particles(const ParticleSet& prev, const MotionModel& model, bool anchor, Rng& rng);

/// Ring sampling of the range message: each sender particle emits
/// x_l + (y - v) [cos t, sin t] with t uniform (stratified over the count
/// emitted particles) and v a noise draw; negative
/// radii are redrawn (bounded) and clamped to zero after that. count particles
/// are emitted, cycling over the sender particles.
ParticleSet sample_range_message(double y, const ParticleSet& sender, const RangeNoiseModel& noise,
                                 std::size_t count, Rng& rng, std::size_t* redraws = nullptr);
MeasurementMessage measurement_message(double y, const Belief& sender, int to, const RangeNoiseModel& noise,
                                       double sigma_k2, std::size_t count, Rng& rng);

/// Importance weights at the prediction particles proportional to the
/// product of the incoming kernel densities, then resampled to J. An empty
/// list returns the prediction. Throws DegenerateWeights if every product is 0.
Belief belief_update(const PredictionMessage& pred, std::span<const KernelMessage* const> incoming,
                     std::size_t j_out, Rng& rng);
ParticleSet product_update(const ParticleSet& pred, std::span<const KernelMessage* const> incoming,
                           std::size_t j_out, Rng& rng);

/// Belief update with the mixture proposal of ProposalConfig.
ParticleSet mixture_update(const ParticleSet& pred, std::span<const KernelMessage* const> incoming,
                           const ProposalConfig& proposal, std::size_t j_out, Rng& rng);

/// Message to a receiver built from the sender's extrinsic density: the
/// sender's prediction times all its incoming messages except `excluded`.
MeasurementMessage extrinsic_message(double y, const PredictionMessage& sender_pred,
                                     std::span<const KernelMessage* const> sender_incoming,
                                     std::size_t excluded, int from, int to, const RangeNoiseModel& noise,
                                     double sigma_k2, const ProposalConfig& proposal, std::size_t count,
                                     Rng& rng);

/// One time step: prediction, then P message passing iterations.
NetworkState coslat_step(const NetworkState& prev, const TopologySnapshot& topo, const MeasurementSet& y,
                         const EngineConfig& cfg, StepReport* report = nullptr);

/// Basis used at a time step for the given reference.
BasisSpec basis_for(const EngineConfig& cfg, const Vec4& target_reference);

std::uint64_t hash_particles(const ParticleSet& p);

}  // namespace coslat
