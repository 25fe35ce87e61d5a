#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "layerpot/config.hpp"

namespace layerpot {

/// One asserted quantity: pass iff `value relation limit` holds.
struct Check {
  std::string name;
  double value = 0.0;
  std::string relation;  // "<=", ">=", "finite"
  double limit = 0.0;
  bool pass = true;
  std::string describe() const;
};

struct RunOutcome {
  int exit_code = 0;  // 0 pass, 1 assertion failure, 2 configuration error
  std::vector<Check> checks;
  std::vector<std::string> failures;
  std::string output_dir;
  std::string summary;
};

/// Executes cfg.command, writing manifest.json, report.txt and CSV tables into
/// cfg.output_dir. Configuration problems come back as exit code 2 rather
/// than as exceptions.
RunOutcome run(const RunConfig& cfg);

struct MissingArtifact : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunReport {
  std::string text;
  std::size_t probe_rows = 0;      // rows of the per-radius table
  std::size_t iteration_rows = 0;  // rows of the per-iteration table
};

/// Summary of a finished run directory. Throws MissingArtifact when the
/// directory has no manifest.
RunReport report(const std::string& dir);

}  // namespace layerpot
