#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "coslat/msgpass.hpp"
#include "coslat/scenario.hpp"

namespace coslat {

enum class Method { Coslat, Baseline };

std::string method_name(Method m);
Method parse_method(const std::string& s);
std::string mode_name(Mode m);
Mode parse_mode(const std::string& s);

struct RunCounters {
  std::size_t degenerate_sensor_updates = 0;
  std::size_t degenerate_target_updates = 0;
  std::size_t fit_failures = 0;
  std::size_t ring_redraws = 0;
  bool operator==(const RunCounters&) const = default;
};

/// Estimates and truth of one (run, method) for n = 1..N; index n - 1.
struct RunRecord {
  int run = 0;
  Method method = Method::Coslat;
  std::vector<std::string> names;
  std::vector<bool> mobile;
  std::vector<std::vector<Vec2>> sensor_estimate;  // [n-1][k]
  std::vector<std::vector<Vec2>> sensor_truth;     // [n-1][k]
  std::vector<std::vector<Vec2>> target_estimate;  // [n-1][k], sensor k's copy
  std::vector<Vec2> target_truth;                  // [n-1]
  std::vector<int> released_at;
  RunCounters counters;
  /// Hash of every measurement consumed, in order of n.
  std::uint64_t measurement_hash = 0;
  bool excluded = false;

  int steps() const { return static_cast<int>(target_truth.size()); }
  bool operator==(const RunRecord&) const = default;
};

struct ExperimentOptions {
  std::vector<Method> methods{Method::Coslat, Method::Baseline};
  Mode mode = Mode::DistributedLc;
  /// Replaces the generated truth realization (replay).
  std::optional<Truth> truth;
  /// Called after every finished (run, method).
  std::function<void(const RunRecord&)> progress;
};

/// The single truth realization shared by all runs of a config.
Truth experiment_truth(const ScenarioConfig& cfg);

RunRecord run_single(const ScenarioConfig& cfg, const Truth& truth, Method method, Mode mode, int run);
std::vector<RunRecord> run_experiment(const ScenarioConfig& cfg, const ExperimentOptions& opts = {});

struct Curve {
  std::string method;
  std::string metric;  // selfloc | track
  std::vector<int> n;
  std::vector<double> rmse;
};

/// Per method: self-localization RMSE over the mobile sensors and tracking
/// RMSE over every sensor's target estimate, averaged over the runs that are
/// not excluded. Methods appear in order of first occurrence.
std::vector<Curve> rmse_curves(const std::vector<RunRecord>& records);

/// Mean of a curve over n in [lo, hi].
double window_mean(const Curve& c, int lo, int hi);
const Curve& find_curve(const std::vector<Curve>& curves, const std::string& method, const std::string& metric);

void write_rmse_csv(const std::vector<Curve>& curves, std::ostream& out);
std::vector<Curve> read_rmse_csv(std::istream& in);
void write_detail_csv(const std::vector<RunRecord>& records, std::ostream& out);
void write_events_csv(const std::vector<RunRecord>& records, std::ostream& out);

/// Writes rmse.csv (and runs.csv, events.csv when detail is set) into dir.
void export_csv(const std::vector<Curve>& curves, const std::vector<RunRecord>& records, const std::string& dir,
                bool detail = false);

}  // namespace coslat
