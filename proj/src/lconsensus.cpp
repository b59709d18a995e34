#include "coslat/lconsensus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace coslat {

std::vector<std::pair<int, int>> BasisSpec::exponents() const {
  std::vector<std::pair<int, int>> e;
  e.reserve(static_cast<std::size_t>(terms()));
  for (int i = 0; i <= degree; ++i) {
    for (int j = 0; j <= degree; ++j) e.emplace_back(i, j);
  }
  return e;
}

Eigen::VectorXd monomials(const Vec2& x, const BasisSpec& basis) {
  const int n = basis.degree + 1;
  const double u1 = (x(0) - basis.center(0)) / basis.scale;
  const double u2 = (x(1) - basis.center(1)) / basis.scale;
  Eigen::VectorXd p1(n), p2(n);
  p1(0) = p2(0) = 1.0;
  for (int k = 1; k < n; ++k) {
    p1(k) = p1(k - 1) * u1;
    p2(k) = p2(k - 1) * u2;
  }
  Eigen::VectorXd phi(n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) phi(i * n + j) = p1(i) * p2(j);
  }
  return phi;
}

Eigen::MatrixXd design_matrix(std::span<const double> x1, std::span<const double> x2, const BasisSpec& basis) {
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(x1.size()), basis.terms());
  for (std::size_t k = 0; k < x1.size(); ++k) {
    phi.row(static_cast<Eigen::Index>(k)) = monomials({x1[k], x2[k]}, basis).transpose();
  }
  return phi;
}

FitResult fit_values(std::span<const double> x1, std::span<const double> x2, std::span<const double> values,
                     const BasisSpec& basis, const FitOptions& opts) {
  const int r = basis.terms();
  if (x1.size() < static_cast<std::size_t>(r)) throw FitError("fit: fewer points than basis terms");
  const Eigen::MatrixXd phi = design_matrix(x1, x2, basis);
  const Eigen::Map<const Eigen::VectorXd> y(values.data(), static_cast<Eigen::Index>(values.size()));
  Eigen::MatrixXd normal = phi.transpose() * phi;
  const double lambda = opts.ridge_scale * normal.trace() / r;
  normal.diagonal().array() += lambda;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  if (ldlt.info() != Eigen::Success || !(normal.trace() > 0.0)) throw FitError("fit: singular normal equations");
  FitResult out;
  out.beta = ldlt.solve(phi.transpose() * y);
  if (!out.beta.allFinite()) throw FitError("fit: non-finite coefficients");
  out.points_used = x1.size();
  out.residual_rms = std::sqrt((phi * out.beta - y).squaredNorm() / static_cast<double>(x1.size()));
  return out;
}

namespace {

FitResult fit_floored(std::span<const double> x1, std::span<const double> x2, std::vector<double> dens,
                      const BasisSpec& basis, const FitOptions& opts) {
  std::size_t floored = 0;
  for (double& d : dens) {
    if (!(d >= opts.density_floor)) {
      d = opts.density_floor;
      ++floored;
    }
  }
  const bool drop = floored > 0 &&
                    static_cast<double>(floored) < opts.discard_fraction * static_cast<double>(dens.size());
  std::vector<double> a, b, y;
  a.reserve(dens.size());
  b.reserve(dens.size());
  y.reserve(dens.size());
  for (std::size_t k = 0; k < dens.size(); ++k) {
    if (drop && dens[k] == opts.density_floor) continue;
    a.push_back(x1[k]);
    b.push_back(x2[k]);
    y.push_back(std::log(dens[k]));
  }
  FitResult res = fit_values(a, b, y, basis, opts);
  res.points_floored = floored;
  return res;
}

}  // namespace

FitResult fit_log_message(const KernelMessage& msg, const ParticleSet& refpoints, const BasisSpec& basis,
                          const FitOptions& opts) {
  std::vector<double> dens(refpoints.size());
  kde_evaluate(msg, refpoints.coord(0), refpoints.coord(1), dens);
  return fit_floored(refpoints.coord(0), refpoints.coord(1), std::move(dens), basis, opts);
}

FitResult fit_log_function(const std::function<double(const Vec2&)>& f, const ParticleSet& refpoints,
                           const BasisSpec& basis, const FitOptions& opts) {
  std::vector<double> dens(refpoints.size());
  for (std::size_t k = 0; k < refpoints.size(); ++k) dens[k] = f(refpoints.location(k));
  return fit_floored(refpoints.coord(0), refpoints.coord(1), std::move(dens), basis, opts);
}

ParticleSet reconstruct_weights(const CoeffVector& B, const ParticleSet& particles, const BasisSpec& basis) {
  if (!B.allFinite()) throw std::invalid_argument("reconstruct_weights: non-finite coefficients");
  const Eigen::MatrixXd phi = design_matrix(particles.coord(0), particles.coord(1), basis);
  const Eigen::VectorXd logw = phi * B;
  ParticleSet out = particles;
  reweight_log(out, {logw.data(), static_cast<std::size_t>(logw.size())});
  return out;
}

std::vector<CoeffVector> aggregate_coefficients(const CommGraph& g, const std::vector<CoeffVector>& betas,
                                                const ConsensusConfig& cfg) {
  const double k = static_cast<double>(g.size());
  if (cfg.exact && g.is_connected()) {
    CoeffVector sum = CoeffVector::Zero(betas.empty() ? 0 : betas[0].size());
    for (const auto& b : betas) sum += b;
    return std::vector<CoeffVector>(betas.size(), sum);
  }
  NodeVectors avg = average_consensus(g, betas, cfg);
  for (auto& v : avg) v *= k;
  return avg;
}

LcOutcome lc_target_beliefs(const std::vector<const KernelMessage*>& messages,
                            const std::vector<ParticleSet>& predictions, const CommGraph& g,
                            const ConsensusConfig& cfg, const BasisSpec& basis, const FitOptions& opts,
                            std::uint64_t resample_seed) {
  const std::size_t k = g.size();
  if (messages.size() != k || predictions.size() != k) {
    throw std::invalid_argument("lc: one message slot and one prediction per sensor required");
  }
  LcOutcome out;
  out.local.assign(k, CoeffVector::Zero(basis.terms()));
  for (std::size_t l = 0; l < k; ++l) {
    if (!messages[l]) continue;
    try {
      out.local[l] = fit_log_message(*messages[l], predictions[l], basis, opts).beta;
    } catch (const FitError&) {
      ++out.fit_failures;
    }
  }
  out.aggregated = aggregate_coefficients(g, out.local, cfg);
  out.beliefs.reserve(k);
  for (std::size_t s = 0; s < k; ++s) {
    Rng rng = make_stream(resample_seed, StreamTag::TargetUpdate, {});
    try {
      const ParticleSet weighted = reconstruct_weights(out.aggregated[s], predictions[s], basis);
      out.beliefs.push_back(resample(weighted, predictions[s].size(), rng));
    } catch (const DegenerateWeights&) {
      ++out.degenerate;
      out.beliefs.push_back(predictions[s]);
    }
  }
  return out;
}

}  // namespace coslat
