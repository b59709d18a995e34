#include "coslat/particles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "coslat/simd/kde_kernels.hpp"

namespace coslat {

ParticleSet::ParticleSet(int dim, std::size_t count)
    : dim_(dim), count_(count), coords_(static_cast<std::size_t>(dim) * count, 0.0),
      weights_(count, count ? 1.0 / static_cast<double>(count) : 0.0) {
  if (dim != 2 && dim != 4) throw std::invalid_argument("particle set: dim must be 2 or 4");
}

ParticleSet ParticleSet::from_states(std::span<const NodeState> states) {
  ParticleSet p(4, states.size());
  for (std::size_t j = 0; j < states.size(); ++j) p.set_state(j, states[j]);
  return p;
}

ParticleSet ParticleSet::from_locations(std::span<const Vec2> locations) {
  ParticleSet p(2, locations.size());
  for (std::size_t j = 0; j < locations.size(); ++j) {
    p.coords_[j] = locations[j](0);
    p.coords_[p.count_ + j] = locations[j](1);
  }
  return p;
}

NodeState ParticleSet::state(std::size_t j) const {
  NodeState s{coords_[j], coords_[count_ + j], 0.0, 0.0};
  if (dim_ == 4) {
    s.v1 = coords_[2 * count_ + j];
    s.v2 = coords_[3 * count_ + j];
  }
  return s;
}

void ParticleSet::set_state(std::size_t j, const NodeState& s) {
  coords_[j] = s.x1;
  coords_[count_ + j] = s.x2;
  if (dim_ == 4) {
    coords_[2 * count_ + j] = s.v1;
    coords_[3 * count_ + j] = s.v2;
  }
}

void ParticleSet::set_equal_weights() {
  std::fill(weights_.begin(), weights_.end(), 1.0 / static_cast<double>(count_));
}

void ParticleSet::normalize() {
  double total = 0.0;
  for (double w : weights_) total += w;
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw DegenerateWeights("particle weights have no positive finite mass");
  }
  for (double& w : weights_) w /= total;
}

bool ParticleSet::finite() const {
  return std::all_of(coords_.begin(), coords_.end(), [](double v) { return std::isfinite(v); }) &&
         std::all_of(weights_.begin(), weights_.end(), [](double v) { return std::isfinite(v) && v >= 0.0; });
}

KernelMessage KernelMessage::from_particles(const ParticleSet& p, double sigma_k2) {
  KernelMessage m;
  m.c1.assign(p.coord(0).begin(), p.coord(0).end());
  m.c2.assign(p.coord(1).begin(), p.coord(1).end());
  m.weights.assign(p.weights().begin(), p.weights().end());
  m.sigma_k2 = sigma_k2;
  m.validate();
  return m;
}

void KernelMessage::validate() const {
  if (!(sigma_k2 > 0.0) || !std::isfinite(sigma_k2)) throw std::invalid_argument("kernel message: sigma_k2 must be > 0");
  if (c1.size() != c2.size() || c1.size() != weights.size() || c1.empty()) {
    throw std::invalid_argument("kernel message: mismatched or empty center arrays");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("kernel message: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("kernel message: weights must sum to 1");
}

namespace {

simd::KernelBatch batch_of(const KernelMessage& m) {
  const double hp = 1.0 / (2.0 * m.sigma_k2);
  return {m.c1, m.c2, m.weights, hp, hp, 1.0 / (2.0 * std::numbers::pi * m.sigma_k2)};
}

}  // namespace

double kde_evaluate(const KernelMessage& msg, const Vec2& query) {
  double out = 0.0;
  const double q1 = query(0);
  const double q2 = query(1);
  simd::kde_sum(batch_of(msg), {{&q1, 1}, {&q2, 1}}, {&out, 1});
  return out;
}

void kde_evaluate(const KernelMessage& msg, std::span<const double> q1, std::span<const double> q2,
                  std::span<double> out) {
  simd::kde_sum(batch_of(msg), {q1, q2}, out);
}

void kde_log_evaluate(const KernelMessage& msg, std::span<const double> q1, std::span<const double> q2,
                      std::span<double> out) {
  simd::kde_log_sum(batch_of(msg), {q1, q2}, out);
}

Vec2 silverman_bandwidth(const ParticleSet& p, double min_sigma) {
  const Moments m = moments(p);
  double wsq = 0.0;
  for (double w : p.weights()) wsq += w * w;
  const double j_eff = wsq > 0.0 ? 1.0 / wsq : static_cast<double>(p.size());
  const double factor = std::pow(j_eff, -1.0 / 6.0);
  return {std::max(std::sqrt(std::max(m.cov(0, 0), 0.0)), min_sigma) * factor,
          std::max(std::sqrt(std::max(m.cov(1, 1), 0.0)), min_sigma) * factor};
}

LocationDensity LocationDensity::from_particles(const ParticleSet& p, BandwidthRule rule, double fixed_sigma2) {
  LocationDensity d;
  d.c1.assign(p.coord(0).begin(), p.coord(0).end());
  d.c2.assign(p.coord(1).begin(), p.coord(1).end());
  d.weights.assign(p.weights().begin(), p.weights().end());
  if (rule == BandwidthRule::Silverman) {
    d.bandwidth = silverman_bandwidth(p);
  } else {
    const double s = std::sqrt(fixed_sigma2);
    d.bandwidth = {s, s};
  }
  return d;
}

void LocationDensity::evaluate(std::span<const double> q1, std::span<const double> q2, std::span<double> out) const {
  const double h1 = bandwidth(0);
  const double h2 = bandwidth(1);
  simd::kde_sum({c1, c2, weights, 1.0 / (2.0 * h1 * h1), 1.0 / (2.0 * h2 * h2),
                 1.0 / (2.0 * std::numbers::pi * h1 * h2)},
                {q1, q2}, out);
}

std::vector<std::size_t> resample_indices(std::span<const double> w, std::size_t j_out, Rng& rng) {
  if (w.empty() || j_out == 0) throw std::invalid_argument("resample: empty input or output");
  double total = 0.0;
  for (double v : w) total += v;
  if (!(total > 0.0) || !std::isfinite(total)) throw DegenerateWeights("resample: degenerate weight vector");

  std::vector<std::size_t> out(j_out);
  const double step = total / static_cast<double>(j_out);
  double u = uniform01(rng) * step;
  double cum = w[0];
  std::size_t i = 0;
  const std::size_t last = w.size() - 1;
  for (std::size_t m = 0; m < j_out; ++m) {
    while (u > cum && i < last) cum += w[++i];
    out[m] = i;
    u += step;
  }
  return out;
}

ParticleSet resample(const ParticleSet& p, std::size_t j_out, Rng& rng) {
  if (p.empty()) throw std::invalid_argument("resample: empty input or output");
  const std::vector<std::size_t> idx = resample_indices(p.weights(), j_out, rng);
  ParticleSet out(p.dim(), j_out);
  for (std::size_t m = 0; m < j_out; ++m) {
    for (int d = 0; d < p.dim(); ++d) out.coord(d)[m] = p.coord(d)[idx[m]];
  }
  return out;
}

ParticleSet importance_weight(const ParticleSet& p, const std::function<double(const NodeState&)>& f) {
  ParticleSet out = p;
  auto w = out.weights();
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double v = f(p.state(j));
    if (!(v >= 0.0)) throw std::invalid_argument("importance_weight: factor must be nonnegative");
    w[j] *= v;
  }
  out.normalize();
  return out;
}

void reweight_log(ParticleSet& p, std::span<const double> log_factors) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  auto w = p.weights();
  std::vector<double> lw(p.size());
  double peak = kNegInf;
  for (std::size_t j = 0; j < p.size(); ++j) {
    lw[j] = w[j] > 0.0 ? std::log(w[j]) + log_factors[j] : kNegInf;
    if (std::isnan(lw[j])) lw[j] = kNegInf;
    peak = std::max(peak, lw[j]);
  }
  if (peak == kNegInf || !std::isfinite(peak)) throw DegenerateWeights("all importance weights vanish");
  for (std::size_t j = 0; j < p.size(); ++j) lw[j] -= peak;
  simd::exp_inplace(lw);
  std::copy(lw.begin(), lw.end(), w.begin());
  p.normalize();
}

Moments moments(const ParticleSet& p) {
  const int d = p.dim();
  const auto w = p.weights();
  double total = 0.0;
  for (double v : w) total += v;
  Moments m;
  m.mean = Eigen::VectorXd::Zero(d);
  m.cov = Eigen::MatrixXd::Zero(d, d);
  if (!(total > 0.0)) return m;
  for (int a = 0; a < d; ++a) {
    const auto x = p.coord(a);
    double s = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) s += w[j] * x[j];
    m.mean(a) = s / total;
  }
  for (int a = 0; a < d; ++a) {
    const auto xa = p.coord(a);
    for (int b = a; b < d; ++b) {
      const auto xb = p.coord(b);
      double s = 0.0;
      for (std::size_t j = 0; j < p.size(); ++j) s += w[j] * (xa[j] - m.mean(a)) * (xb[j] - m.mean(b));
      m.cov(a, b) = m.cov(b, a) = s / total;
    }
  }
  return m;
}

}  // namespace coslat
