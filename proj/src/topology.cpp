#include "coslat/topology.hpp"

#include <stdexcept>
#include <string>

namespace coslat {

void MeasurementSet::add(std::size_t observer, int subject, double y) {
  if (find(observer, subject)) throw std::invalid_argument("measurement set: duplicate link");
  items_.push_back({observer, subject, y});
}

std::optional<double> MeasurementSet::find(std::size_t observer, int subject) const {
  for (const auto& m : items_) {
    if (m.observer == observer && m.subject == subject) return m.y;
  }
  return std::nullopt;
}

TopologySnapshot::TopologySnapshot(std::size_t sensors)
    : comm(sensors), measures(sensors), observes_target(sensors, false) {}

std::vector<std::size_t> TopologySnapshot::target_observers() const {
  std::vector<std::size_t> t;
  for (std::size_t k = 0; k < observes_target.size(); ++k) {
    if (observes_target[k]) t.push_back(k);
  }
  return t;
}

void TopologySnapshot::validate() const {
  if (comm.size() != measures.size() || observes_target.size() != measures.size()) {
    throw std::invalid_argument("topology: inconsistent sensor counts");
  }
  for (std::size_t k = 0; k < measures.size(); ++k) {
    for (std::size_t l : measures[k]) {
      if (l == k || l >= measures.size() || !comm.connected(k, l)) {
        throw std::invalid_argument("topology: measurement link " + std::to_string(k) + " -> " +
                                    std::to_string(l) + " without communication link");
      }
    }
  }
}

}  // namespace coslat
