#pragma once

// Scenario files: INI-style text with top-level keys `experiment` and `name`
// and the sections [grid], [region], [solver], [checks], [output]. Every key
// has an experiment-specific default; keys an experiment does not use are
// rejected. Parsing collects every problem before failing.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "conelab/errors.hpp"
#include "json.hpp"

namespace conelab::scenario {

enum class Experiment {
  em_locality,
  kg_locality,
  dirac_locality,
  sqrt_kg_leakage,
  gaussian_locality,
  entropy_scan,
  two_point_scan,
  nw_probe,
  fock_regional,
  nonseparability,
};

const std::vector<Experiment>& all_experiments();
std::string to_string(Experiment e);
/// One-line description for `list-experiments`.
std::string summary(Experiment e);

struct ConfigIssue {
  std::size_t line = 0;  ///< 1-based; 0 when the problem has no source line
  std::string message;
};

/// Every problem found in a scenario file.
class ConfigErrors : public ConfigError {
 public:
  explicit ConfigErrors(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

using Value = std::variant<double, std::int64_t, bool, std::string, std::vector<double>,
                           std::vector<std::int64_t>>;

struct ScenarioConfig {
  Experiment experiment = Experiment::nonseparability;
  std::string name;
  std::map<std::string, Value> values;       ///< "section.key" -> value
  std::map<std::string, std::size_t> lines;  ///< source line of user-set keys

  double real(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::size_t count(const std::string& key) const;  ///< non-negative integer
  bool flag(const std::string& key) const;
  const std::string& text(const std::string& key) const;
  const std::vector<double>& reals(const std::string& key) const;
  const std::vector<std::int64_t>& integers(const std::string& key) const;
  bool user_set(const std::string& key) const { return lines.count(key) > 0; }

  /// Replaces solver.seeds with a single seed (no-op for experiments
  /// without seeds).
  void override_seed(std::uint64_t seed);

  /// Echo with every resolved value.
  nlohmann::json to_json() const;
};

/// Parses and validates. Throws ConfigErrors listing every issue.
ScenarioConfig parse_config(std::string_view text);
/// Reads a file and parses it; unreadable files raise ConfigErrors.
ScenarioConfig load_config(const std::filesystem::path& path);

/// Keys accepted by an experiment with their defaults, as "section.key = value"
/// lines.
std::vector<std::string> documented_keys(Experiment e);

}  // namespace conelab::scenario
