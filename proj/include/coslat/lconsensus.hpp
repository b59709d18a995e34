#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "coslat/consensusnet.hpp"
#include "coslat/particles.hpp"
#include "coslat/rng.hpp"

namespace coslat {

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor-product monomials u1^i u2^j, i, j = 0..degree, on the normalized
/// coordinates u = (x - center) / scale. Every sensor must use the same spec
/// at a given (n, p) for the coefficient sums to be meaningful.
struct BasisSpec {
  int degree = 3;
  Vec2 center{0.0, 0.0};
  double scale = 1.0;

  int terms() const { return (degree + 1) * (degree + 1); }
  /// (i, j) for term r = i * (degree + 1) + j.
  std::vector<std::pair<int, int>> exponents() const;
};

using CoeffVector = Eigen::VectorXd;

Eigen::VectorXd monomials(const Vec2& x, const BasisSpec& basis);
/// Design matrix with one row per point.
Eigen::MatrixXd design_matrix(std::span<const double> x1, std::span<const double> x2, const BasisSpec& basis);

struct FitOptions {
  double ridge_scale = 1e-9;    // lambda = ridge_scale * trace(normal matrix) / R
  double density_floor = 1e-300;
  double discard_fraction = 0.10;
};

struct FitResult {
  CoeffVector beta;
  double residual_rms = 0.0;
  std::size_t points_used = 0;
  std::size_t points_floored = 0;
};

/// Ridge-regularized least squares of `values` on the basis at the points.
FitResult fit_values(std::span<const double> x1, std::span<const double> x2, std::span<const double> values,
                     const BasisSpec& basis, const FitOptions& opts = {});

/// Least-squares fit of log m(x) at the reference-point locations, with the
/// density floor applied before the log. Floored points are dropped when they
/// are fewer than opts.discard_fraction of all points and kept at the floor
/// otherwise.
FitResult fit_log_message(const KernelMessage& msg, const ParticleSet& refpoints, const BasisSpec& basis,
                          const FitOptions& opts = {});

/// Same fitting rule for an arbitrary nonnegative function of location.
FitResult fit_log_function(const std::function<double(const Vec2&)>& f, const ParticleSet& refpoints,
                           const BasisSpec& basis, const FitOptions& opts = {});

/// Weights proportional to exp(B^T phi(x_j)) times the incoming weights.
ParticleSet reconstruct_weights(const CoeffVector& B, const ParticleSet& particles, const BasisSpec& basis);

/// Per-sensor estimate of sum_l beta_l: K times the average-consensus result,
/// or the exact sum when cfg.exact and the graph is connected.
std::vector<CoeffVector> aggregate_coefficients(const CommGraph& g, const std::vector<CoeffVector>& betas,
                                                const ConsensusConfig& cfg);

struct LcOutcome {
  std::vector<ParticleSet> beliefs;      // one target belief per sensor
  std::vector<CoeffVector> local;        // beta_l (zero outside T_n)
  std::vector<CoeffVector> aggregated;   // per-sensor B estimate
  std::size_t fit_failures = 0;
  std::size_t degenerate = 0;
};

/// Likelihood-consensus target update. messages[l] is null when sensor l is
/// not observing the target. Sensor l fits at its own copy of the target
/// prediction, coefficients are aggregated by consensus, and every sensor
/// reweights and resamples its prediction copy. `resample_seed` seeds the
/// common resampling stream so identical inputs give identical beliefs. A
/// sensor whose reweighting degenerates keeps its prediction.
LcOutcome lc_target_beliefs(const std::vector<const KernelMessage*>& messages,
                            const std::vector<ParticleSet>& predictions, const CommGraph& g,
                            const ConsensusConfig& cfg, const BasisSpec& basis, const FitOptions& opts,
                            std::uint64_t resample_seed);

}  // namespace coslat
