#pragma once

// Runs one configured experiment: composes the module operations, evaluates
// the named checks and writes report.json plus CSV tables and a plotting
// script into the output directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "conelab/config.hpp"
#include "json.hpp"

namespace conelab::scenario {

enum class Relation { le, lt, ge, gt, eq };
std::string to_string(Relation r);

struct Check {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  Relation relation = Relation::le;
  bool pass = false;
};

/// Evaluates `value relation bound`; NaN never passes.
Check make_check(std::string name, double value, Relation relation, double bound);

struct RunOptions {
  /// Overrides output.dir when non-empty.
  std::filesystem::path out_dir;
  /// Worker threads for seeds and refinement levels (0 reads CONELAB_THREADS).
  std::size_t threads = 0;
  bool write_artifacts = true;
};

/// Thread count from CONELAB_THREADS; 1 when unset or unparsable.
std::size_t threads_from_env();

struct RunReport {
  nlohmann::json scenario;
  std::vector<Check> checks;
  bool pass = false;
  double wall_clock_s = 0.0;
  nlohmann::json versions;
  /// Empty for completed runs; otherwise the module error that stopped it.
  std::string error;
  std::string error_kind;  ///< "config", "domain" or empty

  /// 0 pass, 1 failed checks, 2 configuration error, 3 domain error.
  int exit_code() const;
  nlohmann::json to_json(bool include_wall_clock = true) const;
};

nlohmann::json versions();

/// Executes the experiment. Module errors become a failed report; only
/// I/O failures while writing artifacts escape as exceptions.
RunReport run(const ScenarioConfig& config, const RunOptions& options = {});

}  // namespace conelab::scenario
