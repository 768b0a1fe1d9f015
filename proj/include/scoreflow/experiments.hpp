#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace scoreflow::experiments {

enum ExitCode : int {
  kSuccess = 0,
  kClaimFailed = 1,
  kInvalidConfig = 2,
  kNumericalFailure = 3,
};

/// Experiment tags accepted in the "experiment" field.
const std::vector<std::string>& experiment_names();

struct ValidationReport {
  std::vector<std::string> findings;  // empty when the config is runnable
  nlohmann::json resolved;            // the config with every default filled in

  bool ok() const noexcept { return findings.empty(); }
};

/// Schema and invariant check without running anything. Relative measure files are
/// resolved against `base_dir`.
ValidationReport validate(const nlohmann::json& config,
                          const std::filesystem::path& base_dir = {});

struct Claim {
  std::string id;
  std::string description;
  double measured = 0.0;
  double bound = 0.0;
  std::string relation;  // how measured compares with bound, e.g. "<=" or ">="
  bool pass = false;
  nlohmann::json details;
};

nlohmann::json to_json(const Claim& claim);

struct RunResult {
  int exit_code = kSuccess;
  std::vector<Claim> claims;
  std::vector<std::string> findings;  // validation findings when exit_code is kInvalidConfig
  std::string error;                  // numerical failure message
};

/// Runs the experiment and writes trajectories.csv, densities/*.csv, diagnostics.csv,
/// claims.json and manifest.json into `output_dir`. Identical configs give
/// byte-identical files.
RunResult run(const nlohmann::json& config, const std::filesystem::path& output_dir,
              const std::filesystem::path& base_dir = {});

/// Parses a config file; throws std::invalid_argument on unreadable or malformed JSON.
nlohmann::json load_config(const std::filesystem::path& path);

}  // namespace scoreflow::experiments
