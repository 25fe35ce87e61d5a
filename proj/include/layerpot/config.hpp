#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "layerpot/operators.hpp"

namespace layerpot {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Resolved run configuration. Every field has a default; `command` may come
/// from the command line instead of the file.
struct RunConfig {
  std::string command;  // solve, verify-kernels, verify-majorant, verify-operators, local, alpha-decay, flat-oracle
  std::string surface_id = "flat";
  std::string f_id = "decay1";
  double r_min = 1.0 / 256.0, r_max = 256.0;
  int J = 8, A = 64;
  double p = 2.0;
  double tol = 1e-8;
  int max_iter = 60;
  double residual_tol = 1e-2;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  double lambda_star = 0.05;
  double lambda0 = -1.0;       // < 0: use the surface's global constant
  double C_K = -1.0;           // < 0: estimate on the surface
  int ck_random = 3;           // random fields in the C_K estimate
  int n_pairs = 1000;          // verify-majorant sample count
  int n_samples = 10000;       // verify-kernels sample count
  int n_trials = 2;            // verify-operators fields per amplitude
  std::vector<double> eps_list{0.01, 0.02, 0.04};
  std::vector<double> r0{0.5, 1.0};
  double alpha = 0.1;
  double source_r0 = 8.0;
  OperatorConfig ops;

  static const std::vector<std::string>& commands();
  /// Throws ConfigError when a value lies outside its documented range.
  void validate() const;
  bool operator==(const RunConfig& o) const;
};

/// TOML (any extension) or a JSON manifest written by a previous run (.json;
/// the run configuration is read from its "config" object). A non-empty
/// `command` is used when the file has none and must match it otherwise.
RunConfig load_config(const std::string& path, const std::string& command = "");
RunConfig parse_toml_config(const std::string& text, const std::string& command = "");
/// The "config" object of a manifest.
RunConfig config_from_json(const std::string& json_text, const std::string& command = "");
std::string config_to_json(const RunConfig& c);

}  // namespace layerpot
