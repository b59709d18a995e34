#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "coslat/consensusnet.hpp"

namespace coslat {

/// Subject id of the target in range measurements; sensors are 0..K-1.
inline constexpr int kTarget = -1;

struct RangeMeasurement {
  std::size_t observer = 0;
  int subject = kTarget;
  double y = 0.0;
};

/// Measurements of one time step, one per (observer, subject) link.
class MeasurementSet {
 public:
  void add(std::size_t observer, int subject, double y);
  std::optional<double> find(std::size_t observer, int subject) const;
  const std::vector<RangeMeasurement>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

 private:
  std::vector<RangeMeasurement> items_;
};

/// Communication and measurement topology of one time step.
struct TopologySnapshot {
  CommGraph comm;
  /// Sensors measured by each sensor (the sensor part of M_{k,n}), sorted.
  std::vector<std::vector<std::size_t>> measures;
  /// Whether the target is in M_{k,n}.
  std::vector<bool> observes_target;

  explicit TopologySnapshot(std::size_t sensors = 0);
  std::size_t sensors() const { return measures.size(); }
  /// T_n, ascending.
  std::vector<std::size_t> target_observers() const;
  /// Throws std::invalid_argument if a sensor measurement link lacks a
  /// communication link or names the observer itself.
  void validate() const;
};

}  // namespace coslat
