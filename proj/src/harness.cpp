#include "coslat/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "coslat/baseline.hpp"

namespace coslat {
namespace {

struct Hasher {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void feed(const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  }
  template <class T>
  void add(const T& v) {
    feed(&v, sizeof v);
  }
};

void add_counters(RunCounters& c, const StepReport& r) {
  c.degenerate_sensor_updates += r.degenerate_sensor_updates;
  c.degenerate_target_updates += r.degenerate_target_updates;
  c.fit_failures += r.fit_failures;
  c.ring_redraws += r.ring_redraws;
}

std::string format6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + p.string() + "' for writing");
  return f;
}

}  // namespace

std::string method_name(Method m) { return m == Method::Coslat ? "coslat" : "baseline"; }

Method parse_method(const std::string& s) {
  if (s == "coslat") return Method::Coslat;
  if (s == "baseline") return Method::Baseline;
  throw std::invalid_argument("unknown method '" + s + "'");
}

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::DistributedLc: return "distributed-lc";
    case Mode::Centralized: return "centralized";
    case Mode::ExactExtrinsic: return "exact-extrinsic";
  }
  return "unknown";
}

Mode parse_mode(const std::string& s) {
  if (s == "distributed-lc") return Mode::DistributedLc;
  if (s == "centralized") return Mode::Centralized;
  if (s == "exact-extrinsic") return Mode::ExactExtrinsic;
  throw std::invalid_argument("unknown mode '" + s + "'");
}

Truth experiment_truth(const ScenarioConfig& cfg) {
  Rng rng = make_stream(cfg.truth_seed, StreamTag::Truth);
  return generate_truth(cfg, rng);
}

RunRecord run_single(const ScenarioConfig& cfg, const Truth& truth, Method method, Mode mode, int run) {
  const std::size_t k_count = cfg.sensor_count();
  if (truth.sensors.size() != k_count) throw std::invalid_argument("truth table and config disagree on sensor count");
  const int steps = truth.steps;
  const std::uint64_t rs = run_seed(cfg.seed, static_cast<std::uint64_t>(run));
  const EngineConfig eng = cfg.engine(mode, rs);
  const auto priors = cfg.sensor_priors();
  const auto radii = cfg.radii();
  const RangeNoiseModel noise = cfg.noise();

  RunRecord rec;
  rec.run = run;
  rec.method = method;
  for (const auto& s : cfg.sensors) {
    rec.names.push_back(s.name);
    rec.mobile.push_back(!s.anchor);
  }

  NetworkState cs;
  BaselineState bs;
  if (method == Method::Coslat) {
    cs = initial_state(priors, cfg.target_prior(), eng);
  } else {
    bs = baseline_initial(priors, cfg.target_prior(), eng);
  }
  MovementGate gate(cfg.anchor_mask(), cfg.gate_factor * cfg.sigma_v2);
  Hasher hash;

  for (int n = 1; n <= steps; ++n) {
    const auto sensors = sensor_truth_at(truth, gate, n);
    const NodeState& target = truth.target[static_cast<std::size_t>(n)];
    const TopologySnapshot topo = build_topology(sensors, target, radii, cfg.comm_range);
    const MeasurementSet y = generate_measurements(sensors, target, topo, noise, rs, n);
    hash.add(n);
    for (const auto& m : y.items()) {
      hash.add(m.observer);
      hash.add(m.subject);
      hash.add(m.y);
    }

    StepReport report;
    const std::vector<ParticleSet>* sensor_beliefs = nullptr;
    const std::vector<ParticleSet>* target_beliefs = nullptr;
    if (method == Method::Coslat) {
      cs = coslat_step(cs, topo, y, eng, &report);
      sensor_beliefs = &cs.sensors;
      target_beliefs = &cs.target;
    } else {
      bs = baseline_step(bs, topo, y, eng, &report);
      sensor_beliefs = &bs.csl.sensors;
      target_beliefs = &bs.target;
    }
    add_counters(rec.counters, report);

    auto& se = rec.sensor_estimate.emplace_back();
    auto& st = rec.sensor_truth.emplace_back();
    auto& te = rec.target_estimate.emplace_back();
    for (std::size_t k = 0; k < k_count; ++k) {
      se.push_back(moments((*sensor_beliefs)[k]).location_mean());
      st.push_back(sensors[k].location());
      te.push_back(moments((*target_beliefs)[k]).location_mean());
      if (rec.mobile[k]) gate.update(k, (*sensor_beliefs)[k], n);
    }
    rec.target_truth.push_back(target.location());
  }
  for (std::size_t k = 0; k < k_count; ++k) rec.released_at.push_back(gate.released_at(k));
  rec.measurement_hash = hash.h;

  if (steps > 0) {
    double err = 0.0;
    for (const auto& e : rec.target_estimate.back()) err += (e - rec.target_truth.back()).norm();
    err /= static_cast<double>(k_count);
    rec.excluded = !(err <= cfg.divergence_threshold);
  }
  return rec;
}

std::vector<RunRecord> run_experiment(const ScenarioConfig& cfg, const ExperimentOptions& opts) {
  cfg.validate();
  const Truth truth = opts.truth ? *opts.truth : experiment_truth(cfg);
  std::vector<RunRecord> out;
  for (int run = 0; run < cfg.runs; ++run) {
    for (Method m : opts.methods) {
      out.push_back(run_single(cfg, truth, m, opts.mode, run));
      if (opts.progress) opts.progress(out.back());
    }
  }
  return out;
}

std::vector<Curve> rmse_curves(const std::vector<RunRecord>& records) {
  std::vector<std::string> order;
  for (const auto& r : records) {
    const auto name = method_name(r.method);
    if (std::find(order.begin(), order.end(), name) == order.end()) order.push_back(name);
  }
  std::vector<Curve> out;
  for (const auto& name : order) {
    int steps = 0;
    for (const auto& r : records) {
      if (method_name(r.method) == name) steps = std::max(steps, r.steps());
    }
    std::vector<double> self_sum(steps, 0.0), track_sum(steps, 0.0);
    std::vector<double> self_cnt(steps, 0.0), track_cnt(steps, 0.0);
    for (const auto& r : records) {
      if (method_name(r.method) != name || r.excluded) continue;
      for (int i = 0; i < r.steps(); ++i) {
        const auto u = static_cast<std::size_t>(i);
        for (std::size_t k = 0; k < r.mobile.size(); ++k) {
          if (r.mobile[k]) {
            self_sum[u] += (r.sensor_estimate[u][k] - r.sensor_truth[u][k]).squaredNorm();
            self_cnt[u] += 1.0;
          }
          track_sum[u] += (r.target_estimate[u][k] - r.target_truth[u]).squaredNorm();
          track_cnt[u] += 1.0;
        }
      }
    }
    Curve self{name, "selfloc", {}, {}};
    Curve track{name, "track", {}, {}};
    for (int i = 0; i < steps; ++i) {
      const auto u = static_cast<std::size_t>(i);
      self.n.push_back(i + 1);
      track.n.push_back(i + 1);
      self.rmse.push_back(self_cnt[u] > 0.0 ? std::sqrt(self_sum[u] / self_cnt[u]) : 0.0);
      track.rmse.push_back(track_cnt[u] > 0.0 ? std::sqrt(track_sum[u] / track_cnt[u]) : 0.0);
    }
    out.push_back(std::move(self));
    out.push_back(std::move(track));
  }
  return out;
}

double window_mean(const Curve& c, int lo, int hi) {
  double s = 0.0;
  int cnt = 0;
  for (std::size_t i = 0; i < c.n.size(); ++i) {
    if (c.n[i] >= lo && c.n[i] <= hi) {
      s += c.rmse[i];
      ++cnt;
    }
  }
  if (cnt == 0) throw std::invalid_argument("window_mean: empty window");
  return s / cnt;
}

const Curve& find_curve(const std::vector<Curve>& curves, const std::string& method, const std::string& metric) {
  for (const auto& c : curves) {
    if (c.method == method && c.metric == metric) return c;
  }
  throw std::invalid_argument("no " + metric + " curve for method '" + method + "'");
}

void write_rmse_csv(const std::vector<Curve>& curves, std::ostream& out) {
  out << "method,metric,n,rmse\n";
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.n.size(); ++i) {
      out << c.method << ',' << c.metric << ',' << c.n[i] << ',' << format6(c.rmse[i]) << '\n';
    }
  }
}

std::vector<Curve> read_rmse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "method,metric,n,rmse") {
    throw std::runtime_error("rmse table: missing or unexpected header");
  }
  std::vector<Curve> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string method, metric, n, v;
    if (!std::getline(ss, method, ',') || !std::getline(ss, metric, ',') || !std::getline(ss, n, ',') ||
        !std::getline(ss, v)) {
      throw std::runtime_error("rmse table: row " + std::to_string(row) + " needs 4 columns");
    }
    Curve* c = nullptr;
    for (auto& e : out) {
      if (e.method == method && e.metric == metric) c = &e;
    }
    if (!c) c = &out.emplace_back(Curve{method, metric, {}, {}});
    try {
      c->n.push_back(std::stoi(n));
      c->rmse.push_back(std::stod(v));
    } catch (const std::exception&) {
      throw std::runtime_error("rmse table: bad number in row " + std::to_string(row));
    }
  }
  return out;
}

void write_detail_csv(const std::vector<RunRecord>& records, std::ostream& out) {
  out << "run,method,n,role,node,est_x1,est_x2,true_x1,true_x2\n";
  for (const auto& r : records) {
    const std::string head = std::to_string(r.run) + ',' + method_name(r.method) + ',';
    for (int i = 0; i < r.steps(); ++i) {
      const auto u = static_cast<std::size_t>(i);
      for (std::size_t k = 0; k < r.names.size(); ++k) {
        const Vec2& e = r.sensor_estimate[u][k];
        const Vec2& t = r.sensor_truth[u][k];
        out << head << i + 1 << ",sensor," << r.names[k] << ',' << format6(e(0)) << ',' << format6(e(1)) << ','
            << format6(t(0)) << ',' << format6(t(1)) << '\n';
      }
      for (std::size_t k = 0; k < r.names.size(); ++k) {
        const Vec2& e = r.target_estimate[u][k];
        const Vec2& t = r.target_truth[u];
        out << head << i + 1 << ",target," << r.names[k] << ',' << format6(e(0)) << ',' << format6(e(1)) << ','
            << format6(t(0)) << ',' << format6(t(1)) << '\n';
      }
    }
  }
}

void write_events_csv(const std::vector<RunRecord>& records, std::ostream& out) {
  out << "run,method,excluded,degenerate_sensor,degenerate_target,fit_failures,ring_redraws,"
         "measurement_hash,released_at\n";
  for (const auto& r : records) {
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(r.measurement_hash));
    std::string rel;
    for (std::size_t k = 0; k < r.released_at.size(); ++k) {
      if (!r.mobile[k]) continue;
      rel += (rel.empty() ? "" : " ") + r.names[k] + ':' + std::to_string(r.released_at[k]);
    }
    out << r.run << ',' << method_name(r.method) << ',' << (r.excluded ? 1 : 0) << ','
        << r.counters.degenerate_sensor_updates << ',' << r.counters.degenerate_target_updates << ','
        << r.counters.fit_failures << ',' << r.counters.ring_redraws << ',' << hash << ',' << rel << '\n';
  }
}

void export_csv(const std::vector<Curve>& curves, const std::vector<RunRecord>& records, const std::string& dir,
                bool detail) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
  const fs::path base(dir);
  {
    auto f = open_out(base / "rmse.csv");
    write_rmse_csv(curves, f);
    if (!f) throw std::runtime_error("write to '" + (base / "rmse.csv").string() + "' failed");
  }
  if (detail) {
    auto f = open_out(base / "runs.csv");
    write_detail_csv(records, f);
    auto g = open_out(base / "events.csv");
    write_events_csv(records, g);
    if (!f || !g) throw std::runtime_error("write to '" + dir + "' failed");
  }
}

}  // namespace coslat
