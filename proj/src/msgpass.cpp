#include "coslat/msgpass.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "coslat/simd/kde_kernels.hpp"

namespace coslat {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::uint64_t kTargetKey = 0xFFFFu;
constexpr int kMaxRingRedraws = 16;

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

void log_density(const LocationDensity& d, std::span<const double> q1, std::span<const double> q2,
                 std::span<double> out) {
  const double h1 = d.bandwidth(0);
  const double h2 = d.bandwidth(1);
  simd::kde_log_sum({d.c1, d.c2, d.weights, 1.0 / (2.0 * h1 * h1), 1.0 / (2.0 * h2 * h2),
                     1.0 / (2.0 * std::numbers::pi * h1 * h2)},
                    {q1, q2}, out);
}

std::size_t pick(std::size_t n, Rng& rng) {
  const auto i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
  return std::min(i, n - 1);
}

// Index i drawn with probability proportional to w_i K_h(x - x_i).
std::size_t pick_by_kernel(const ParticleSet& p, double x1, double x2, double h1, double h2,
                           std::vector<double>& logw, Rng& rng) {
  const auto c1 = p.coord(0);
  const auto c2 = p.coord(1);
  const auto w = p.weights();
  logw.resize(p.size());
  double peak = kNegInf;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d1 = (x1 - c1[i]) / h1;
    const double d2 = (x2 - c2[i]) / h2;
    logw[i] = w[i] > 0.0 ? std::log(w[i]) - 0.5 * (d1 * d1 + d2 * d2) : kNegInf;
    peak = std::max(peak, logw[i]);
  }
  if (peak == kNegInf) return pick(p.size(), rng);
  // Terms more than e^-40 below the peak do not change the sum in double.
  double total = 0.0;
  for (double& v : logw) {
    v = v - peak > -40.0 ? std::exp(v - peak) : 0.0;
    total += v;
  }
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < p.size(); ++i) {
    u -= logw[i];
    if (u < 0.0) return i;
  }
  return p.size() - 1;
}

ParticleSet equalize(const ParticleSet& p, Rng& rng) {
  const auto w = p.weights();
  const double first = w.empty() ? 0.0 : w[0];
  const bool equal = std::all_of(w.begin(), w.end(), [&](double v) { return std::abs(v - first) <= 1e-15; });
  return equal ? p : resample(p, p.size(), rng);
}

std::vector<const KernelMessage*> without(std::span<const KernelMessage* const> v, std::size_t excluded) {
  std::vector<const KernelMessage*> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i != excluded) out.push_back(v[i]);
  }
  return out;
}

}  // namespace

NetworkState initial_state(std::span<const StatePrior> sensor_priors, const StatePrior& target_prior,
                           const EngineConfig& cfg) {
  if (cfg.particles == 0) throw std::invalid_argument("engine: particle count must be positive");
  NetworkState s;
  s.n = 0;
  s.sensors.reserve(sensor_priors.size());
  for (std::size_t k = 0; k < sensor_priors.size(); ++k) {
    const StatePrior& prior = sensor_priors[k];
    prior.validate();
    if (prior.kind == StatePrior::Kind::Dirac) {
      const NodeState one[] = {prior.point};
      s.sensors.push_back(ParticleSet::from_states(one));
      continue;
    }
    Rng rng = make_stream(cfg.seed, StreamTag::Prior, {k});
    std::vector<NodeState> draws(cfg.particles);
    for (auto& d : draws) d = prior.sample(rng);
    s.sensors.push_back(ParticleSet::from_states(draws));
  }
  if (cfg.track_target) {
    target_prior.validate();
    Rng rng = make_stream(cfg.seed, StreamTag::Prior, {kTargetKey});
    std::vector<NodeState> draws(cfg.particles);
    for (auto& d : draws) d = target_prior.sample(rng);
    s.target.assign(sensor_priors.size(), ParticleSet::from_states(draws));
    s.target_reference =
        target_prior.kind == StatePrior::Kind::Dirac ? target_prior.point.vector() : target_prior.mean;
  }
  return s;
}

ParticleSet predict_particles(const ParticleSet& prev, const MotionModel& model, bool anchor, Rng& rng) {
  if (anchor) return prev;
  ParticleSet out = equalize(prev, rng);
  for (std::size_t j = 0; j < out.size(); ++j) {
    out.set_state(j, propagate(out.state(j), model, draw_driving_noise(model, rng)));
  }
  out.set_equal_weights();
  return out;
}

PredictionMessage prediction_message(const Belief& prev, const MotionModel& model, bool anchor, Rng& rng) {
  return {prev.owner, predict_particles(prev.particles, model, anchor, rng)};
}

ParticleSet sample_range_message(double y, const ParticleSet& sender, const RangeNoiseModel& noise,
                                 std::size_t count, Rng& rng, std::size_t* redraws) {
  if (sender.empty() || count == 0) throw std::invalid_argument("range message: empty sender or count");
  if (!std::isfinite(y)) throw std::invalid_argument("range message: non-finite measurement");
  ParticleSet out(2, count);
  auto o1 = out.coord(0);
  auto o2 = out.coord(1);
  const auto s1 = sender.coord(0);
  const auto s2 = sender.coord(1);
  // Stratified angles: particle j gets stratum order[j] of count equal arcs,
  // so each angle is still uniform but the ring is covered evenly.
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t j = count; j > 1; --j) std::swap(order[j - 1], order[pick(j, rng)]);
  const double arc = 2.0 * std::numbers::pi / static_cast<double>(count);
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t i = j % sender.size();
    const double theta = arc * (static_cast<double>(order[j]) + uniform01(rng));
    double r = y - noise.sample(rng);
    for (int t = 0; r < 0.0 && t < kMaxRingRedraws; ++t) {
      r = y - noise.sample(rng);
      if (redraws) ++*redraws;
    }
    r = std::max(r, 0.0);
    o1[j] = s1[i] + r * std::cos(theta);
    o2[j] = s2[i] + r * std::sin(theta);
  }
  return out;
}

MeasurementMessage measurement_message(double y, const Belief& sender, int to, const RangeNoiseModel& noise,
                                       double sigma_k2, std::size_t count, Rng& rng) {
  MeasurementMessage m;
  m.from = sender.owner;
  m.to = to;
  m.particles = sample_range_message(y, equalize(sender.particles, rng), noise, count, rng);
  m.kernel = KernelMessage::from_particles(m.particles, sigma_k2);
  return m;
}

ParticleSet product_update(const ParticleSet& pred, std::span<const KernelMessage* const> incoming,
                           std::size_t j_out, Rng& rng) {
  if (incoming.empty()) return pred;
  const std::size_t j = pred.size();
  std::vector<double> logw(j, 0.0);
  std::vector<double> term(j);
  for (const KernelMessage* m : incoming) {
    kde_log_evaluate(*m, pred.coord(0), pred.coord(1), term);
    for (std::size_t i = 0; i < j; ++i) logw[i] += term[i];
  }
  ParticleSet weighted = pred;
  reweight_log(weighted, logw);
  return resample(weighted, j_out, rng);
}

Belief belief_update(const PredictionMessage& pred, std::span<const KernelMessage* const> incoming,
                     std::size_t j_out, Rng& rng) {
  return {pred.owner, 0, product_update(pred.particles, incoming, j_out, rng)};
}

ParticleSet mixture_update(const ParticleSet& pred, std::span<const KernelMessage* const> incoming,
                           const ProposalConfig& proposal, std::size_t j_out, Rng& rng) {
  if (incoming.empty()) return pred;
  const double alpha = proposal.prediction_fraction;
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("proposal: prediction fraction must be in [0, 1]");
  if (alpha >= 1.0) return product_update(pred, incoming, j_out, rng);

  const std::size_t batch = j_out;
  const auto from_pred = static_cast<std::size_t>(std::llround(alpha * static_cast<double>(batch)));
  const double a = static_cast<double>(from_pred) / static_cast<double>(batch);
  const double log_a = a > 0.0 ? std::log(a) : kNegInf;
  const double log_b = a < 1.0 ? std::log((1.0 - a) / static_cast<double>(incoming.size())) : kNegInf;
  const LocationDensity density = LocationDensity::from_particles(pred, BandwidthRule::Silverman);
  const double h1 = density.bandwidth(0);
  const double h2 = density.bandwidth(1);

  std::vector<NodeState> states;
  std::vector<double> logw;
  ParticleSet draw(pred.dim(), batch);
  std::vector<double> log_pred(batch), log_prod(batch), log_mix(batch), term(batch);
  std::vector<bool> from_message;
  const int max_batches = std::max(1, proposal.max_batches);
  for (int b = 0; b < max_batches; ++b) {
    for (std::size_t i = 0; i < batch; ++i) {
      NodeState s = pred.state(pick(pred.size(), rng));
      if (i < from_pred) {
        s.x1 += h1 * standard_normal(rng);
        s.x2 += h2 * standard_normal(rng);
      } else {
        const KernelMessage& m = *incoming[pick(incoming.size(), rng)];
        const std::size_t c = pick(m.size(), rng);
        const double sk = std::sqrt(m.sigma_k2);
        s.x1 = m.c1[c] + sk * standard_normal(rng);
        s.x2 = m.c2[c] + sk * standard_normal(rng);
      }
      draw.set_state(i, s);
      states.push_back(s);
      from_message.push_back(i >= from_pred);
    }

    log_density(density, draw.coord(0), draw.coord(1), log_pred);
    log_prod = log_pred;
    std::fill(log_mix.begin(), log_mix.end(), kNegInf);
    for (const KernelMessage* m : incoming) {
      kde_log_evaluate(*m, draw.coord(0), draw.coord(1), term);
      for (std::size_t i = 0; i < batch; ++i) {
        log_prod[i] += term[i];
        log_mix[i] = log_add(log_mix[i], term[i]);
      }
    }
    for (std::size_t i = 0; i < batch; ++i) {
      const double q = log_add(log_a + log_pred[i], log_b + log_mix[i]);
      logw.push_back(q == kNegInf || std::isnan(log_prod[i]) ? kNegInf : log_prod[i] - q);
    }

    // Batches share one proposal, so pooling them is plain importance
    // sampling with more draws. Stop once the pool is not degenerate.
    const double peak = *std::max_element(logw.begin(), logw.end());
    if (peak == kNegInf) continue;
    double s1 = 0.0, s2 = 0.0;
    for (double lw : logw) {
      const double w = std::exp(lw - peak);
      s1 += w;
      s2 += w * w;
    }
    if (s1 * s1 / s2 >= proposal.min_ess_fraction * static_cast<double>(j_out)) break;
  }

  // Weights depend on location only. A message draw gets its velocity after
  // resampling, from the prediction kernel density given its location, so the
  // joint proposal is q(x) p(v | x) and the weights stay exact.
  const double peak = *std::max_element(logw.begin(), logw.end());
  if (peak == kNegInf) throw DegenerateWeights("mixture_update: no draw has positive weight");
  std::vector<double> w(logw.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(logw[i] - peak);
  const std::vector<std::size_t> idx = resample_indices(w, j_out, rng);
  ParticleSet out(pred.dim(), j_out);
  std::vector<double> kernel_w;
  for (std::size_t m = 0; m < j_out; ++m) {
    NodeState s = states[idx[m]];
    if (pred.dim() == 4 && from_message[idx[m]]) {
      const std::size_t i_v = pick_by_kernel(pred, s.x1, s.x2, h1, h2, kernel_w, rng);
      s.v1 = pred.coord(2)[i_v];
      s.v2 = pred.coord(3)[i_v];
    }
    out.set_state(m, s);
  }
  return out;
}

MeasurementMessage extrinsic_message(double y, const PredictionMessage& sender_pred,
                                     std::span<const KernelMessage* const> sender_incoming,
                                     std::size_t excluded, int from, int to, const RangeNoiseModel& noise,
                                     double sigma_k2, const ProposalConfig& proposal, std::size_t count,
                                     Rng& rng) {
  const auto rest = without(sender_incoming, excluded);
  const ParticleSet ext = mixture_update(sender_pred.particles, rest, proposal, sender_pred.particles.size(), rng);
  return measurement_message(y, {from, 0, ext}, to, noise, sigma_k2, count, rng);
}

BasisSpec basis_for(const EngineConfig& cfg, const Vec4& target_reference) {
  BasisSpec b;
  b.degree = cfg.basis_degree;
  b.center = target_reference.head<2>();
  b.scale = cfg.basis_scale;
  return b;
}

std::uint64_t hash_particles(const ParticleSet& p) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const double* data, std::size_t n) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  feed(p.raw_coords().data(), p.raw_coords().size());
  feed(p.weights().data(), p.weights().size());
  return h;
}

namespace {

struct Link {
  std::size_t receiver;
  std::size_t sender;    // sensor index; unused for target links
  bool from_target;      // message target -> receiver
  std::size_t observer;  // who took the measurement
  double y;
};

// Measurement factors that produce sensor-bound messages: both directions of
// every sensor-sensor measurement, and target -> observer.
std::vector<Link> sensor_links(const TopologySnapshot& topo, const MeasurementSet& y) {
  std::vector<Link> links;
  for (const auto& m : y.items()) {
    if (m.subject == kTarget) {
      links.push_back({m.observer, 0, true, m.observer, m.y});
      continue;
    }
    const auto l = static_cast<std::size_t>(m.subject);
    if (l >= topo.sensors() || !topo.comm.connected(m.observer, l)) {
      throw TopologyViolation("measurement between sensors without a communication link");
    }
    links.push_back({m.observer, l, false, m.observer, m.y});
    links.push_back({l, m.observer, false, m.observer, m.y});
  }
  return links;
}

}  // namespace

NetworkState coslat_step(const NetworkState& prev, const TopologySnapshot& topo, const MeasurementSet& y,
                         const EngineConfig& cfg, StepReport* report) {
  const std::size_t k_count = topo.sensors();
  if (prev.sensors.size() != k_count || cfg.anchor.size() != k_count) {
    throw std::invalid_argument("coslat_step: sensor count mismatch between state, topology and config");
  }
  if (cfg.track_target && prev.target.size() != k_count) {
    throw std::invalid_argument("coslat_step: one target copy per sensor required");
  }
  if (cfg.iterations < 0) throw std::invalid_argument("coslat_step: iterations must be >= 0");
  topo.validate();

  const int n = prev.n + 1;
  const auto un = static_cast<std::uint64_t>(n);
  const std::size_t j = cfg.particles;
  StepReport local_report;
  StepReport& rep = report ? *report : local_report;

  NetworkState next;
  next.n = n;
  next.target_reference = cfg.motion.G * prev.target_reference;
  const BasisSpec basis = basis_for(cfg, next.target_reference);

  std::vector<ParticleSet> preds(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    Rng rng = make_stream(cfg.seed, StreamTag::Prediction, {k, un});
    preds[k] = predict_particles(prev.sensors[k], cfg.motion, cfg.anchor[k], rng);
  }
  std::vector<ParticleSet> target_preds;
  if (cfg.track_target) {
    target_preds.resize(k_count);
    for (std::size_t k = 0; k < k_count; ++k) {
      Rng rng = make_stream(cfg.seed, StreamTag::TargetPrediction, {un});
      target_preds[k] = predict_particles(prev.target[k], cfg.motion, false, rng);
    }
  }

  const bool exact = cfg.mode == Mode::ExactExtrinsic;
  const bool central = cfg.mode == Mode::Centralized;
  const std::vector<Link> links = sensor_links(topo, y);

  std::vector<ParticleSet> beliefs = preds;
  std::vector<ParticleSet> target = target_preds;
  std::vector<ParticleSet> extrinsic = preds;  // sensor beliefs without the target message
  LcOutcome last_lc;

  for (int p = 1; p <= cfg.iterations; ++p) {
    const auto up = static_cast<std::uint64_t>(p);
    auto& hashes = rep.prediction_hashes.emplace_back();
    for (const auto& pr : preds) hashes.push_back(hash_particles(pr));
    for (const auto& pr : target_preds) hashes.push_back(hash_particles(pr));

    std::vector<Envelope<const ParticleSet*>> out;
    for (const Link& l : links) {
      if (!l.from_target && !cfg.anchor[l.receiver]) out.push_back({l.sender, l.receiver, &beliefs[l.sender]});
    }
    const auto inbox = mailbox_exchange(topo.comm, std::move(out));

    // Messages to sensors, from the p-1 beliefs.
    std::vector<std::vector<KernelMessage>> to_sensor(k_count);
    std::vector<std::vector<bool>> is_target_msg(k_count);
    std::vector<std::size_t> used(k_count, 0);
    for (const Link& l : links) {
      const std::size_t k = l.receiver;
      if (cfg.anchor[k]) continue;
      if (l.from_target) {
        if (!cfg.track_target) continue;
        Rng rng = make_stream(cfg.seed, StreamTag::TargetMessage, {k, un, up});
        ParticleSet source = target[k];
        if (exact) {
          if (p == 1 || last_lc.aggregated.empty()) {
            source = target_preds[k];
          } else {
            try {
              const CoeffVector b = last_lc.aggregated[k] - last_lc.local[k];
              source = resample(reconstruct_weights(b, target_preds[k], basis), j, rng);
            } catch (const DegenerateWeights&) {
              ++rep.degenerate_target_updates;
              source = target_preds[k];
            }
          }
        }
        const ParticleSet ring = sample_range_message(l.y, equalize(source, rng), cfg.noise, j, rng,
                                                      &rep.ring_redraws);
        to_sensor[k].push_back(KernelMessage::from_particles(ring, cfg.sigma_k2));
        is_target_msg[k].push_back(true);
        continue;
      }
      const ParticleSet* sender = inbox[k][used[k]++].payload;
      Rng rng = make_stream(cfg.seed, StreamTag::Message, {k, l.sender, l.observer, un, up});
      const ParticleSet ring = sample_range_message(l.y, equalize(*sender, rng), cfg.noise, j, rng,
                                                    &rep.ring_redraws);
      to_sensor[k].push_back(KernelMessage::from_particles(ring, cfg.sigma_k2));
      is_target_msg[k].push_back(false);
    }

    // Messages to the target, also from the p-1 beliefs.
    std::vector<std::optional<KernelMessage>> to_target(k_count);
    if (cfg.track_target) {
      for (const auto& m : y.items()) {
        if (m.subject != kTarget) continue;
        const std::size_t l = m.observer;
        Rng rng = make_stream(cfg.seed, StreamTag::Message, {l, kTargetKey, un, up});
        const ParticleSet& source = exact ? extrinsic[l] : beliefs[l];
        const ParticleSet ring = sample_range_message(m.y, equalize(source, rng), cfg.noise, j, rng,
                                                      &rep.ring_redraws);
        to_target[l] = KernelMessage::from_particles(ring, cfg.sigma_k2);
      }
    }

    // Sensor updates.
    std::vector<ParticleSet> next_beliefs(k_count);
    std::vector<ParticleSet> next_extrinsic = extrinsic;
    for (std::size_t k = 0; k < k_count; ++k) {
      if (cfg.anchor[k] || to_sensor[k].empty()) {
        next_beliefs[k] = preds[k];
        next_extrinsic[k] = preds[k];
        continue;
      }
      std::vector<const KernelMessage*> ptrs;
      std::vector<const KernelMessage*> sensor_only;
      for (std::size_t i = 0; i < to_sensor[k].size(); ++i) {
        ptrs.push_back(&to_sensor[k][i]);
        if (!is_target_msg[k][i]) sensor_only.push_back(&to_sensor[k][i]);
      }
      Rng rng = make_stream(cfg.seed, StreamTag::Update, {k, un, up});
      try {
        next_beliefs[k] = mixture_update(preds[k], ptrs, cfg.proposal, j, rng);
      } catch (const DegenerateWeights&) {
        ++rep.degenerate_sensor_updates;
        next_beliefs[k] = preds[k];
      }
      if (exact && topo.observes_target[k]) {
        if (sensor_only.size() == ptrs.size()) {
          next_extrinsic[k] = next_beliefs[k];
        } else {
          Rng ext_rng = make_stream(cfg.seed, StreamTag::Extrinsic, {k, un, up});
          try {
            next_extrinsic[k] = mixture_update(preds[k], sensor_only, cfg.proposal, j, ext_rng);
          } catch (const DegenerateWeights&) {
            ++rep.degenerate_sensor_updates;
            next_extrinsic[k] = preds[k];
          }
        }
      }
    }

    // Target update.
    if (cfg.track_target) {
      std::vector<const KernelMessage*> msgs(k_count, nullptr);
      for (std::size_t l = 0; l < k_count; ++l) {
        if (to_target[l]) msgs[l] = &*to_target[l];
      }
      if (central) {
        std::vector<const KernelMessage*> present;
        for (const auto* m : msgs) {
          if (m) present.push_back(m);
        }
        Rng rng = make_stream(cfg.seed, StreamTag::TargetUpdate, {un, up});
        ParticleSet b;
        try {
          b = product_update(target_preds[0], present, j, rng);
        } catch (const DegenerateWeights&) {
          ++rep.degenerate_target_updates;
          b = target_preds[0];
        }
        target.assign(k_count, b);
      } else {
        const std::uint64_t rs = make_stream(cfg.seed, StreamTag::TargetUpdate, {un, up})();
        last_lc = lc_target_beliefs(msgs, target_preds, topo.comm, cfg.consensus, basis, cfg.fit, rs);
        rep.fit_failures += last_lc.fit_failures;
        rep.degenerate_target_updates += last_lc.degenerate;
        target = last_lc.beliefs;
      }
      rep.target_per_iteration.push_back(target[0]);
    }

    beliefs = std::move(next_beliefs);
    extrinsic = std::move(next_extrinsic);
  }

  next.sensors = std::move(beliefs);
  next.target = std::move(target);
  return next;
}

}  // namespace coslat
