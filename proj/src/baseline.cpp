#include "coslat/baseline.hpp"

#include <cmath>
#include <stdexcept>

namespace coslat {

BaselineState baseline_initial(std::span<const StatePrior> sensor_priors, const StatePrior& target_prior,
                               const EngineConfig& cfg) {
  EngineConfig with_target = cfg;
  with_target.track_target = true;
  NetworkState full = initial_state(sensor_priors, target_prior, with_target);
  BaselineState s;
  s.target = std::move(full.target);
  s.target_reference = full.target_reference;
  s.csl = std::move(full);
  s.csl.target.clear();
  return s;
}

NetworkState csl_step(const NetworkState& prev, const TopologySnapshot& topo, const MeasurementSet& y,
                      const EngineConfig& cfg, StepReport* report) {
  MeasurementSet sensor_only;
  for (const auto& m : y.items()) {
    if (m.subject != kTarget) sensor_only.add(m.observer, m.subject, m.y);
  }
  EngineConfig c = cfg;
  c.track_target = false;
  NetworkState in = prev;
  in.target.clear();
  return coslat_step(in, topo, sensor_only, c, report);
}

std::vector<ParticleSet> dtt_step(const std::vector<ParticleSet>& prev_target,
                                  const std::vector<Vec2>& sensor_estimates, const TopologySnapshot& topo,
                                  const MeasurementSet& y, const EngineConfig& cfg, int n,
                                  const Vec4& reference, StepReport* report) {
  const std::size_t k_count = topo.sensors();
  if (prev_target.size() != k_count || sensor_estimates.size() != k_count) {
    throw std::invalid_argument("dtt_step: one target copy and one location estimate per sensor required");
  }
  StepReport local;
  StepReport& rep = report ? *report : local;
  const auto un = static_cast<std::uint64_t>(n);

  std::vector<ParticleSet> preds(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    Rng rng = make_stream(cfg.seed, StreamTag::TargetPrediction, {un});
    preds[k] = predict_particles(prev_target[k], cfg.motion, false, rng);
  }

  std::vector<std::pair<std::size_t, double>> obs;
  for (const auto& m : y.items()) {
    if (m.subject == kTarget) obs.emplace_back(m.observer, m.y);
  }
  if (obs.empty()) return preds;

  auto likelihood = [&](std::size_t k, double yk) {
    const Vec2 at = sensor_estimates[k];
    return [&cfg, at, yk](const Vec2& x) { return range_likelihood(yk, x, at, cfg.noise); };
  };

  const std::uint64_t resample_seed = make_stream(cfg.seed, StreamTag::TargetUpdate, {un, 0})();
  if (cfg.mode == Mode::Centralized) {
    const ParticleSet& pred = preds[0];
    std::vector<double> logw(pred.size(), 0.0);
    for (const auto& [k, yk] : obs) {
      const auto f = likelihood(k, yk);
      for (std::size_t j = 0; j < pred.size(); ++j) logw[j] += std::log(f(pred.location(j)));
    }
    Rng rng = make_stream(resample_seed, StreamTag::TargetUpdate, {});
    ParticleSet b;
    try {
      ParticleSet w = pred;
      reweight_log(w, logw);
      b = resample(w, pred.size(), rng);
    } catch (const DegenerateWeights&) {
      ++rep.degenerate_target_updates;
      b = pred;
    }
    return std::vector<ParticleSet>(k_count, b);
  }

  const BasisSpec basis = basis_for(cfg, reference);
  std::vector<CoeffVector> betas(k_count, CoeffVector::Zero(basis.terms()));
  for (const auto& [k, yk] : obs) {
    try {
      betas[k] = fit_log_function(likelihood(k, yk), preds[k], basis, cfg.fit).beta;
    } catch (const FitError&) {
      ++rep.fit_failures;
    }
  }
  const auto agg = aggregate_coefficients(topo.comm, betas, cfg.consensus);
  std::vector<ParticleSet> out;
  out.reserve(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    Rng rng = make_stream(resample_seed, StreamTag::TargetUpdate, {});
    try {
      out.push_back(resample(reconstruct_weights(agg[k], preds[k], basis), preds[k].size(), rng));
    } catch (const DegenerateWeights&) {
      ++rep.degenerate_target_updates;
      out.push_back(preds[k]);
    }
  }
  return out;
}

BaselineState baseline_step(const BaselineState& prev, const TopologySnapshot& topo, const MeasurementSet& y,
                            const EngineConfig& cfg, StepReport* report) {
  BaselineState next;
  next.csl = csl_step(prev.csl, topo, y, cfg, report);
  next.target_reference = cfg.motion.G * prev.target_reference;
  std::vector<Vec2> est;
  est.reserve(next.csl.sensors.size());
  for (const auto& b : next.csl.sensors) est.push_back(moments(b).location_mean());
  next.target = dtt_step(prev.target, est, topo, y, cfg, next.csl.n, next.target_reference, report);
  return next;
}

}  // namespace coslat
