#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "coslat/lconsensus.hpp"
#include "coslat/particles.hpp"
#include "coslat/rng.hpp"

namespace testutil {

/// Average ranks (ties share the mean rank).
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double mean = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = mean;
    i = j + 1;
  }
  return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson(ranks(a), ranks(b));
}

inline coslat::ParticleSet cloud(std::size_t n, const coslat::Vec2& mean, double sd, coslat::Rng& rng) {
  std::vector<coslat::Vec2> pts;
  for (std::size_t j = 0; j < n; ++j) {
    pts.emplace_back(mean(0) + sd * coslat::standard_normal(rng), mean(1) + sd * coslat::standard_normal(rng));
  }
  return coslat::ParticleSet::from_locations(pts);
}

/// Range-ring kernel message around `center` with radius `r`.
inline coslat::KernelMessage ring_message(const coslat::Vec2& center, double r, std::size_t n, double sigma_k2,
                                          coslat::Rng& rng) {
  coslat::KernelMessage m;
  m.sigma_k2 = sigma_k2;
  for (std::size_t j = 0; j < n; ++j) {
    const double th = 2 * 3.141592653589793 * coslat::uniform01(rng);
    const double rr = r + std::sqrt(2.0) * coslat::standard_normal(rng);
    m.c1.push_back(center(0) + rr * std::cos(th));
    m.c2.push_back(center(1) + rr * std::sin(th));
    m.weights.push_back(1.0 / static_cast<double>(n));
  }
  return m;
}

/// Log of the product of kernel densities at every particle.
inline std::vector<double> log_product(const std::vector<const coslat::KernelMessage*>& msgs,
                                       const coslat::ParticleSet& p) {
  std::vector<double> total(p.size(), 0.0), term(p.size());
  for (const auto* m : msgs) {
    coslat::kde_log_evaluate(*m, p.coord(0), p.coord(1), term);
    for (std::size_t j = 0; j < p.size(); ++j) total[j] += term[j];
  }
  return total;
}

inline std::vector<double> fitted_log(const coslat::CoeffVector& b, const coslat::ParticleSet& p,
                                      const coslat::BasisSpec& basis) {
  const Eigen::VectorXd v = coslat::design_matrix(p.coord(0), p.coord(1), basis) * b;
  return {v.data(), v.data() + v.size()};
}

}  // namespace testutil
