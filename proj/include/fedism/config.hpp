#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fedism/experiment.hpp"

namespace fedism::config {

/// Raised for malformed files, unknown keys and invalid values. `key()` names
/// the offending dotted key when there is one.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Flat view of a config file: dotted key -> raw value.
using KeyValues = std::map<std::string, std::string>;

/// Parses the plain-text format:
///
///   # comment
///   [method]
///   q = 2.0
///   experiment.rounds = 100   # dotted keys work anywhere
///
/// A key inside a [section] is prefixed with "section.".
KeyValues parse(std::string_view text);

/// Applies "key=value" overrides on top of `kv`.
void apply_overrides(KeyValues& kv, const std::vector<std::string>& overrides);

/// Master seed and seed count; seeds run as seed, seed+1, ..., seed+num_seeds-1.
struct RunSettings {
  ExperimentConfig experiment;
  std::uint64_t master_seed = 0;
  std::size_t num_seeds = 3;
};

/// Strict conversion: any key not in the schema is an error.
RunSettings to_settings(const KeyValues& kv);

/// Serialises every key of the schema, so the output alone reproduces a run.
std::string to_text(const RunSettings& settings);

/// All recognised dotted keys.
const std::vector<std::string>& schema_keys();

void refresh_seeds(RunSettings& settings);

}  // namespace fedism::config
