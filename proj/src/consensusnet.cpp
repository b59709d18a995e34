#include "coslat/consensusnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace coslat {

CommGraph::CommGraph(std::size_t nodes) : adj_(nodes) {}

void CommGraph::add_edge(std::size_t a, std::size_t b) {
  if (a == b) throw std::invalid_argument("comm graph: self-loop");
  if (a >= adj_.size() || b >= adj_.size()) throw std::out_of_range("comm graph: node index");
  if (connected(a, b)) return;
  adj_[a].insert(std::upper_bound(adj_[a].begin(), adj_[a].end(), b), b);
  adj_[b].insert(std::upper_bound(adj_[b].begin(), adj_[b].end(), a), a);
}

bool CommGraph::connected(std::size_t a, std::size_t b) const {
  return std::binary_search(adj_[a].begin(), adj_[a].end(), b);
}

std::size_t CommGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& a : adj_) n += a.size();
  return n / 2;
}

std::vector<std::size_t> CommGraph::components() const {
  constexpr auto kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> label(adj_.size(), kUnset);
  std::size_t next = 0;
  for (std::size_t s = 0; s < adj_.size(); ++s) {
    if (label[s] != kUnset) continue;
    std::vector<std::size_t> stack{s};
    label[s] = next;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v : adj_[u]) {
        if (label[v] == kUnset) {
          label[v] = next;
          stack.push_back(v);
        }
      }
    }
    ++next;
  }
  return label;
}

bool CommGraph::is_connected() const {
  const auto c = components();
  return std::all_of(c.begin(), c.end(), [](std::size_t l) { return l == 0; });
}

double edge_weight(const CommGraph& g, std::size_t i, std::size_t j, WeightRule rule) {
  switch (rule) {
    case WeightRule::Metropolis:
      return 1.0 / (1.0 + static_cast<double>(std::max(g.degree(i), g.degree(j))));
    case WeightRule::MaxDegree: {
      std::size_t dmax = 0;
      for (std::size_t k = 0; k < g.size(); ++k) dmax = std::max(dmax, g.degree(k));
      return 1.0 / (1.0 + static_cast<double>(dmax));
    }
  }
  return 0.0;
}

NodeVectors consensus_round(const CommGraph& g, const NodeVectors& values, WeightRule rule) {
  if (values.size() != g.size()) throw std::invalid_argument("consensus: one vector per node required");
  NodeVectors next = values;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double self = 1.0;
    for (std::size_t j : g.neighbors(i)) {
      const double w = edge_weight(g, i, j, rule);
      next[i] += w * (values[j] - values[i]);
      self -= w;
    }
    if (self < -1e-12) throw ConsensusError("consensus: negative self weight, weight rule misconfigured");
  }
  return next;
}

NodeVectors average_consensus(const CommGraph& g, const NodeVectors& values, const ConsensusConfig& cfg) {
  if (values.size() != g.size()) throw std::invalid_argument("consensus: one vector per node required");
  if (cfg.iterations < 0) throw std::invalid_argument("consensus: iterations must be >= 0");
  if (cfg.exact) {
    const auto label = g.components();
    const std::size_t ncomp = label.empty() ? 0 : *std::max_element(label.begin(), label.end()) + 1;
    NodeVectors out = values;
    for (std::size_t c = 0; c < ncomp; ++c) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(values.empty() ? 0 : values[0].size());
      double count = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (label[i] == c) {
          sum += values[i];
          count += 1.0;
        }
      }
      const Eigen::VectorXd mean = sum / count;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (label[i] == c) out[i] = mean;
      }
    }
    return out;
  }
  NodeVectors cur = values;
  for (int it = 0; it < cfg.iterations; ++it) {
    cur = consensus_round(g, cur, cfg.rule);
    for (const auto& v : cur) {
      if (!v.allFinite()) throw ConsensusError("consensus: values diverged");
    }
  }
  return cur;
}

}  // namespace coslat
