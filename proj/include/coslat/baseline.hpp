#pragma once

#include <vector>

#include "coslat/msgpass.hpp"

namespace coslat {

/// Reference method: cooperative self-localization without any target
/// messages, plus a likelihood-consensus particle filter for the target that
/// treats the sensors' CSL means as known locations.
struct BaselineState {
  NetworkState csl;                // track_target = false
  std::vector<ParticleSet> target;  // per-sensor target copies
  Vec4 target_reference = Vec4::Zero();
};

BaselineState baseline_initial(std::span<const StatePrior> sensor_priors, const StatePrior& target_prior,
                               const EngineConfig& cfg);

/// coslat_step restricted to sensor-sensor measurements.
NetworkState csl_step(const NetworkState& prev, const TopologySnapshot& topo, const MeasurementSet& y,
                      const EngineConfig& cfg, StepReport* report = nullptr);

/// One distributed particle-filter update of the target copies from the
/// sensor-target ranges of the sensors in T_n, with sensor k located at
/// sensor_estimates[k]. Centralized mode multiplies the likelihoods directly
/// instead of fitting and aggregating them.
std::vector<ParticleSet> dtt_step(const std::vector<ParticleSet>& prev_target,
                                  const std::vector<Vec2>& sensor_estimates, const TopologySnapshot& topo,
                                  const MeasurementSet& y, const EngineConfig& cfg, int n,
                                  const Vec4& reference, StepReport* report = nullptr);

BaselineState baseline_step(const BaselineState& prev, const TopologySnapshot& topo, const MeasurementSet& y,
                            const EngineConfig& cfg, StepReport* report = nullptr);

}  // namespace coslat
