#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace coslat {

/// A send addressed to a node that is not a communication neighbor.
class TopologyViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConsensusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Undirected communication graph over sensor indices 0..n-1.
class CommGraph {
 public:
  CommGraph() = default;
  explicit CommGraph(std::size_t nodes);

  /// Inserts both directions; self-loops are rejected.
  void add_edge(std::size_t a, std::size_t b);
  bool connected(std::size_t a, std::size_t b) const;
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return adj_[i]; }
  std::size_t degree(std::size_t i) const { return adj_[i].size(); }
  std::size_t size() const { return adj_.size(); }
  std::size_t edge_count() const;
  /// Component label per node, labels assigned in order of first node.
  std::vector<std::size_t> components() const;
  bool is_connected() const;

 private:
  std::vector<std::vector<std::size_t>> adj_;
};

enum class WeightRule { Metropolis, MaxDegree };

struct ConsensusConfig {
  int iterations = 5;
  WeightRule rule = WeightRule::Metropolis;
  /// Replace the iteration by its limit: every node receives the exact
  /// per-component sum scaled as the iteration would converge to.
  bool exact = false;
};

/// Weight w_ij for an existing edge (i, j).
double edge_weight(const CommGraph& g, std::size_t i, std::size_t j, WeightRule rule);

using NodeVectors = std::vector<Eigen::VectorXd>;

/// One synchronous round x_i <- x_i + sum_{j in N(i)} w_ij (x_j - x_i),
/// reading only the previous round's values.
NodeVectors consensus_round(const CommGraph& g, const NodeVectors& values, WeightRule rule);

/// cfg.iterations rounds (or the exact per-component average when cfg.exact).
NodeVectors average_consensus(const CommGraph& g, const NodeVectors& values, const ConsensusConfig& cfg);

template <class Payload>
struct Envelope {
  std::size_t from = 0;
  std::size_t to = 0;
  Payload payload{};
};

/// Delivers every envelope to its addressee's inbox in send order. Throws
/// TopologyViolation if any envelope is addressed to a non-neighbor.
template <class Payload>
std::vector<std::vector<Envelope<Payload>>> mailbox_exchange(const CommGraph& g,
                                                             std::vector<Envelope<Payload>> outgoing) {
  for (const auto& e : outgoing) {
    if (e.from >= g.size() || e.to >= g.size() || !g.connected(e.from, e.to)) {
      throw TopologyViolation("send " + std::to_string(e.from) + " -> " + std::to_string(e.to) +
                              " is not a communication link");
    }
  }
  std::vector<std::vector<Envelope<Payload>>> inbox(g.size());
  for (auto& e : outgoing) inbox[e.to].push_back(std::move(e));
  return inbox;
}

}  // namespace coslat
