// layerpot <command> --config <path> [--seed S] [--out DIR]
// layerpot report <run dir>

#include <iostream>

#include <CLI11.hpp>

#include "layerpot/runner.hpp"

int main(int argc, char** argv) {
  using namespace layerpot;
  CLI::App app{"Single layer potential solver and estimate verification"};
  app.require_subcommand(1);

  std::string config_path;
  std::int64_t seed = -1;
  std::string out_dir;
  for (const std::string& name : RunConfig::commands()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " suite");
    sub->add_option("--config", config_path, "TOML config or a manifest.json from an earlier run")->required();
    sub->add_option("--seed", seed, "override the config seed")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", out_dir, "override output_dir");
  }
  std::string report_dir;
  CLI::App* rep = app.add_subcommand("report", "summarise a finished run directory");
  rep->add_option("dir", report_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (rep->parsed()) {
    try {
      std::cout << report(report_dir).text;
      return 0;
    } catch (const MissingArtifact& e) {
      std::cerr << "report: " << e.what() << "\n";
      return 1;
    }
  }

  const std::string command = app.get_subcommands().front()->get_name();
  RunConfig cfg;
  try {
    cfg = load_config(config_path, command);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  }
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  if (!out_dir.empty()) cfg.output_dir = out_dir;

  const RunOutcome res = run(cfg);
  std::cout << res.summary;
  for (const auto& f : res.failures) std::cerr << "FAIL " << f << "\n";
  return res.exit_code;
}
