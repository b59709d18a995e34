#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "coslat/scenario.hpp"

namespace coslat {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads a `key = value` configuration. Blank lines and text after `#` are
/// ignored; unknown or repeated keys are errors. Keys not given keep the
/// values of ScenarioConfig::defaults(). `sensor.<name> = anchor|mobile x y`
/// lines, if any, replace the default layout in file order.
ScenarioConfig parse_config(std::istream& in, const std::string& source = "<config>");
ScenarioConfig load_config(const std::string& path);

/// Writes every key; parse_config of the output reproduces the config.
void write_config(const ScenarioConfig& cfg, std::ostream& out);

}  // namespace coslat
