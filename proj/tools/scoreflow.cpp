#include "scoreflow/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace fs = std::filesystem;
namespace ex = scoreflow::experiments;

namespace {

int print_findings(const std::vector<std::string>& findings) {
  for (const auto& f : findings) std::cerr << "config: " << f << '\n';
  return ex::kInvalidConfig;
}

int do_validate(const fs::path& config_path) {
  nlohmann::json cfg;
  try {
    cfg = ex::load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return ex::kInvalidConfig;
  }
  const auto report = ex::validate(cfg, config_path.parent_path());
  nlohmann::json out = {{"valid", report.ok()},
                        {"findings", report.findings},
                        {"resolved", report.resolved}};
  std::cout << out.dump(2) << '\n';
  return report.ok() ? ex::kSuccess : ex::kInvalidConfig;
}

int do_run(const fs::path& config_path, const std::string& output_override) {
  nlohmann::json cfg;
  try {
    cfg = ex::load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return ex::kInvalidConfig;
  }
  fs::path output;
  if (!output_override.empty()) {
    output = output_override;
  } else if (cfg.is_object() && cfg.contains("output") && cfg["output"].is_string()) {
    output = cfg["output"].get<std::string>();
  } else {
    output = fs::path("scoreflow-out") / cfg.value("experiment", std::string("run"));
  }

  const auto result = ex::run(cfg, output, config_path.parent_path());
  if (result.exit_code == ex::kInvalidConfig) return print_findings(result.findings);
  for (const auto& c : result.claims) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.id << ": measured " << c.measured << ' '
              << c.relation << ' ' << c.bound << '\n';
  }
  if (result.exit_code == ex::kNumericalFailure) {
    std::cerr << "numerical failure: " << result.error << '\n';
  }
  std::cout << "outputs written to " << output.string() << '\n';
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Score-based generation experiments on empirical measures"};
  app.require_subcommand(1);

  std::string config;
  std::string output;
  auto* run = app.add_subcommand("run", "Run an experiment config and write its artifacts");
  run->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--output", output, "Output directory (overrides the config)");

  std::string vconfig;
  auto* validate = app.add_subcommand("validate", "Check a config and print the resolved defaults");
  validate->add_option("config", vconfig, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ex::kInvalidConfig;
  }
  if (*run) return do_run(config, output);
  return do_validate(vconfig);
}
