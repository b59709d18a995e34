#include "coslat/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <vector>

namespace coslat {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream ss(s);
  std::vector<std::string> out;
  for (std::string w; ss >> w;) out.push_back(w);
  return out;
}

double to_double(const std::string& w) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
  if (ec != std::errc{} || p != w.data() + w.size()) throw std::invalid_argument("'" + w + "' is not a number");
  return v;
}

long long to_int(const std::string& w) {
  long long v = 0;
  const auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
  if (ec != std::errc{} || p != w.data() + w.size()) throw std::invalid_argument("'" + w + "' is not an integer");
  return v;
}

std::vector<double> numbers(const std::string& value, std::size_t count) {
  const auto w = words(value);
  if (w.size() != count) {
    throw std::invalid_argument("expected " + std::to_string(count) + " numbers, got " + std::to_string(w.size()));
  }
  std::vector<double> out;
  for (const auto& s : w) out.push_back(to_double(s));
  return out;
}

double one_number(const std::string& v) { return numbers(v, 1)[0]; }

long long one_int(const std::string& v) {
  const auto w = words(v);
  if (w.size() != 1) throw std::invalid_argument("expected one integer");
  return to_int(w[0]);
}

bool boolean(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("'" + v + "' is not a boolean");
}

std::string fmt(double v) {
  // Shortest text that reads back to the same double.
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

using Setter = std::function<void(ScenarioConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"scenario", [](ScenarioConfig& c, const std::string& v) { c.scenario = static_cast<int>(one_int(v)); }},
      {"steps", [](ScenarioConfig& c, const std::string& v) { c.steps = static_cast<int>(one_int(v)); }},
      {"runs", [](ScenarioConfig& c, const std::string& v) { c.runs = static_cast<int>(one_int(v)); }},
      {"seed", [](ScenarioConfig& c, const std::string& v) { c.seed = static_cast<std::uint64_t>(one_int(v)); }},
      {"truth_seed",
       [](ScenarioConfig& c, const std::string& v) { c.truth_seed = static_cast<std::uint64_t>(one_int(v)); }},
      {"comm_range", [](ScenarioConfig& c, const std::string& v) { c.comm_range = one_number(v); }},
      {"restricted_radius", [](ScenarioConfig& c, const std::string& v) { c.restricted_radius = one_number(v); }},
      {"restricted.scenario1", [](ScenarioConfig& c, const std::string& v) { c.restricted_scenario1 = words(v); }},
      {"restricted.scenario2", [](ScenarioConfig& c, const std::string& v) { c.restricted_scenario2 = words(v); }},
      {"sigma_v2", [](ScenarioConfig& c, const std::string& v) { c.sigma_v2 = one_number(v); }},
      {"sigma_u2", [](ScenarioConfig& c, const std::string& v) { c.sigma_u2 = one_number(v); }},
      {"prior.box",
       [](ScenarioConfig& c, const std::string& v) {
         const auto n = numbers(v, 2);
         c.prior_box_lo = n[0];
         c.prior_box_hi = n[1];
       }},
      {"prior.velocity_mean",
       [](ScenarioConfig& c, const std::string& v) {
         const auto n = numbers(v, 2);
         c.velocity_mean = {n[0], n[1]};
       }},
      {"prior.velocity_var",
       [](ScenarioConfig& c, const std::string& v) {
         const auto n = numbers(v, 2);
         c.velocity_var = {n[0], n[1]};
       }},
      {"target.mean",
       [](ScenarioConfig& c, const std::string& v) {
         const auto n = numbers(v, 4);
         c.target_mean = {n[0], n[1], n[2], n[3]};
       }},
      {"target.var",
       [](ScenarioConfig& c, const std::string& v) {
         const auto n = numbers(v, 4);
         c.target_var = {n[0], n[1], n[2], n[3]};
       }},
      {"gate_factor", [](ScenarioConfig& c, const std::string& v) { c.gate_factor = one_number(v); }},
      {"divergence_threshold",
       [](ScenarioConfig& c, const std::string& v) { c.divergence_threshold = one_number(v); }},
      {"particles",
       [](ScenarioConfig& c, const std::string& v) {
         const long long n = one_int(v);
         if (n < 1) throw std::invalid_argument("particles must be >= 1");
         c.particles = static_cast<std::size_t>(n);
       }},
      {"iterations", [](ScenarioConfig& c, const std::string& v) { c.iterations = static_cast<int>(one_int(v)); }},
      {"consensus.iterations",
       [](ScenarioConfig& c, const std::string& v) { c.consensus_iterations = static_cast<int>(one_int(v)); }},
      {"consensus.weights",
       [](ScenarioConfig& c, const std::string& v) {
         if (v == "metropolis") {
           c.weight_rule = WeightRule::Metropolis;
         } else if (v == "max-degree") {
           c.weight_rule = WeightRule::MaxDegree;
         } else {
           throw std::invalid_argument("expected metropolis or max-degree");
         }
       }},
      {"consensus.exact", [](ScenarioConfig& c, const std::string& v) { c.exact_consensus = boolean(v); }},
      {"kernel_sigma2", [](ScenarioConfig& c, const std::string& v) { c.kernel_sigma2 = one_number(v); }},
      {"basis.degree",
       [](ScenarioConfig& c, const std::string& v) { c.basis_degree = static_cast<int>(one_int(v)); }},
      {"basis.scale", [](ScenarioConfig& c, const std::string& v) { c.basis_scale = one_number(v); }},
      {"proposal.prediction_fraction",
       [](ScenarioConfig& c, const std::string& v) { c.prediction_fraction = one_number(v); }},
  };
  return table;
}

}  // namespace

ScenarioConfig parse_config(std::istream& in, const std::string& source) {
  ScenarioConfig cfg = ScenarioConfig::defaults();
  std::vector<SensorSpec> layout;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = source + ":" + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + "empty key");
    if (!seen.insert(key).second) throw ConfigError(where + "repeated key '" + key + "'");
    try {
      if (key.rfind("sensor.", 0) == 0) {
        const auto w = words(value);
        if (w.size() != 3 || (w[0] != "anchor" && w[0] != "mobile")) {
          throw std::invalid_argument("expected 'anchor|mobile x y'");
        }
        layout.push_back({key.substr(7), w[0] == "anchor", {to_double(w[1]), to_double(w[2])}});
        continue;
      }
      const auto it = setters().find(key);
      if (it == setters().end()) throw std::invalid_argument("unknown key");
      it->second(cfg, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  if (!layout.empty()) cfg.sensors = std::move(layout);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  return parse_config(f, path);
}

void write_config(const ScenarioConfig& c, std::ostream& out) {
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& w : v) s += (s.empty() ? "" : " ") + w;
    return s;
  };
  out << "scenario = " << c.scenario << "\n";
  out << "steps = " << c.steps << "\n";
  out << "runs = " << c.runs << "\n";
  out << "seed = " << c.seed << "\n";
  out << "truth_seed = " << c.truth_seed << "\n";
  out << "comm_range = " << fmt(c.comm_range) << "\n";
  out << "restricted_radius = " << fmt(c.restricted_radius) << "\n";
  out << "restricted.scenario1 = " << join(c.restricted_scenario1) << "\n";
  out << "restricted.scenario2 = " << join(c.restricted_scenario2) << "\n";
  out << "sigma_v2 = " << fmt(c.sigma_v2) << "\n";
  out << "sigma_u2 = " << fmt(c.sigma_u2) << "\n";
  out << "prior.box = " << fmt(c.prior_box_lo) << " " << fmt(c.prior_box_hi) << "\n";
  out << "prior.velocity_mean = " << fmt(c.velocity_mean(0)) << " " << fmt(c.velocity_mean(1)) << "\n";
  out << "prior.velocity_var = " << fmt(c.velocity_var(0)) << " " << fmt(c.velocity_var(1)) << "\n";
  out << "target.mean =";
  for (int i = 0; i < 4; ++i) out << " " << fmt(c.target_mean(i));
  out << "\ntarget.var =";
  for (int i = 0; i < 4; ++i) out << " " << fmt(c.target_var(i));
  out << "\n";
  out << "gate_factor = " << fmt(c.gate_factor) << "\n";
  out << "divergence_threshold = " << fmt(c.divergence_threshold) << "\n";
  out << "particles = " << c.particles << "\n";
  out << "iterations = " << c.iterations << "\n";
  out << "consensus.iterations = " << c.consensus_iterations << "\n";
  out << "consensus.weights = " << (c.weight_rule == WeightRule::Metropolis ? "metropolis" : "max-degree") << "\n";
  out << "consensus.exact = " << (c.exact_consensus ? "true" : "false") << "\n";
  out << "kernel_sigma2 = " << fmt(c.kernel_sigma2) << "\n";
  out << "basis.degree = " << c.basis_degree << "\n";
  out << "basis.scale = " << fmt(c.basis_scale) << "\n";
  out << "proposal.prediction_fraction = " << fmt(c.prediction_fraction) << "\n";
  for (const auto& s : c.sensors) {
    out << "sensor." << s.name << " = " << (s.anchor ? "anchor" : "mobile") << " " << fmt(s.location(0)) << " "
        << fmt(s.location(1)) << "\n";
  }
}

}  // namespace coslat
