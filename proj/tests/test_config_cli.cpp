#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "layerpot/runner.hpp"

using namespace layerpot;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(testing::TempDir()) / ("layerpot_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream o;
  o << in.rdbuf();
  return o.str();
}

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

int cli(const std::string& args) {
  const int rc = std::system((std::string(LAYERPOT_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

RunConfig flat_solve(const fs::path& out) {
  RunConfig c = parse_toml_config("surface = \"flat\"\nf = \"decay1\"\n", "solve");
  c.output_dir = out.string();
  return c;
}

// One finished flat solve shared by the report and determinism tests.
const fs::path& solved_dir() {
  static const fs::path dir = [] {
    const fs::path d = scratch("solve_a");
    const RunOutcome r = run(flat_solve(d));
    EXPECT_EQ(r.exit_code, 0) << r.summary;
    return d;
  }();
  return dir;
}

}  // namespace

TEST(Config, ParsesToml) {
  const RunConfig c = parse_toml_config(R"(
command = "local"
surface = "wave:0.02"
f = "catalog"
J = 16
A = 128
r0 = 0.5
eps_list = [0.03, 0.05]
seed = 42
[operators]
panel_order = 10
)");
  EXPECT_EQ(c.command, "local");
  EXPECT_EQ(c.surface_id, "wave:0.02");
  EXPECT_EQ(c.f_id, "catalog");
  EXPECT_EQ(c.J, 16);
  EXPECT_EQ(c.A, 128);
  EXPECT_EQ(c.r0, std::vector<double>{0.5});
  EXPECT_EQ(c.eps_list, (std::vector<double>{0.03, 0.05}));
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.ops.panel_order, 10);
  EXPECT_EQ(c.p, 2.0);
}

TEST(Config, CommandFromCallerOrFile) {
  EXPECT_EQ(parse_toml_config("surface = \"flat\"\n", "solve").command, "solve");
  EXPECT_EQ(parse_toml_config("command = \"solve\"\n", "solve").command, "solve");
  EXPECT_THROW(parse_toml_config("command = \"solve\"\n", "local"), ConfigError);
  EXPECT_THROW(parse_toml_config("command = \"bogus\"\n"), ConfigError);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_toml_config("srface = \"flat\"\n", "solve"), ConfigError);
  EXPECT_THROW(parse_toml_config("[operators]\npanel = 3\n", "solve"), ConfigError);
  EXPECT_THROW(parse_toml_config("J = 7\n", "solve"), ConfigError);
  EXPECT_THROW(parse_toml_config("p = 1.0\n", "solve"), ConfigError);
  EXPECT_THROW(parse_toml_config("surface = \"bumpy:0.1\"\n", "solve"), ConfigError);
  EXPECT_THROW(parse_toml_config("f = \"nope\"\n", "solve"), ConfigError);
  EXPECT_THROW(parse_toml_config("r_max = 300.0\n", "solve"), ConfigError);
  EXPECT_THROW(parse_toml_config("eps_list = [0.5, 0.1]\n", "verify-operators"), ConfigError);
  EXPECT_THROW(parse_toml_config("r0 = [0.001]\n", "local"), ConfigError);
  EXPECT_THROW(parse_toml_config("seed = -3\n", "solve"), ConfigError);
  EXPECT_THROW(parse_toml_config("J = \"eight\"\n", "solve"), ConfigError);
  EXPECT_THROW(parse_toml_config("this is not toml", "solve"), ConfigError);
}

TEST(Config, JsonRoundTrip) {
  RunConfig c = parse_toml_config("surface = \"cone:0.05\"\nalpha = 0.5\nr0 = [0.5, 1.0]\nC_K = 0.4\n", "alpha-decay");
  c.ops.near_angular_nodes = 64;
  const std::string j = config_to_json(c);
  EXPECT_TRUE(config_from_json(j) == c);
  // manifests wrap the configuration
  const std::string manifest = "{\"config\": " + j + ", \"status\": \"pass\"}";
  EXPECT_TRUE(config_from_json(manifest, "alpha-decay") == c);
}

TEST(Run, ConfigErrorIsExitTwoWithoutArtifacts) {
  RunConfig c = flat_solve(scratch("bad"));
  c.J = 7;
  const RunOutcome r = run(c);
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_FALSE(fs::exists(fs::path(c.output_dir) / "manifest.json"));
}

TEST(Run, AdmissibilityGate) {
  RunConfig c = flat_solve(scratch("gate"));
  c.surface_id = "cone:0.05";
  c.lambda0 = 0.4;
  const RunOutcome r = run(c);
  EXPECT_EQ(r.exit_code, 1);
  ASSERT_FALSE(r.failures.empty());
  EXPECT_NE(r.failures.front().find("lambda0 exceeds admissible threshold"), std::string::npos);
  const auto m = nlohmann::json::parse(slurp(fs::path(c.output_dir) / "manifest.json"));
  EXPECT_EQ(m["exit_code"], 1);
  EXPECT_FALSE(m["failures"].empty());
}

TEST(Run, FlatSolveReport) {
  const fs::path& dir = solved_dir();
  const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(m["status"], "pass");
  for (const char* k : {"config", "constants", "C_K_estimate", "versions", "checks"}) EXPECT_TRUE(m.contains(k)) << k;
  const RunReport rep = report(dir.string());
  EXPECT_EQ(rep.probe_rows, make_grid()->probe_radii().size());
  // u_1 = R f, then the zero step that confirms it
  EXPECT_EQ(rep.iteration_rows, 2u);
  EXPECT_NE(rep.text.find("1 iteration(s), verdict converged"), std::string::npos);
}

TEST(Run, ManifestReproducesTheRun) {
  const fs::path& dir = solved_dir();
  const RunConfig c = load_config((dir / "manifest.json").string(), "solve");
  EXPECT_TRUE(c == flat_solve(dir));
}

TEST(Run, Deterministic) {
  const fs::path& a = solved_dir();
  const fs::path b = scratch("solve_b");
  ASSERT_EQ(run(flat_solve(b)).exit_code, 0);
  int compared = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    if (entry.path().extension() != ".csv") continue;
    EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << entry.path().filename();
    ++compared;
  }
  EXPECT_GE(compared, 5);
}

TEST(Run, SeedStability) {
  std::vector<RunOutcome> outs;
  for (std::uint64_t seed : {1u, 2u}) {
    RunConfig c = parse_toml_config("surface = \"cone:0.05\"\neps_list = [0.02, 0.04]\n", "verify-kernels");
    c.seed = seed;
    c.output_dir = scratch("seed" + std::to_string(seed)).string();
    outs.push_back(run(c));
    ASSERT_EQ(outs.back().exit_code, 0);
  }
  int compared = 0;
  for (const char* name : {"kernel_g_bound", "kernel_grad_g_bound", "kernel_g_scaled", "g_eps2_scaling_0.02_0.04_high"}) {
    double a = 0, b = 0;
    for (const auto& ch : outs[0].checks)
      if (ch.name == name) a = ch.value;
    for (const auto& ch : outs[1].checks)
      if (ch.name == name) b = ch.value;
    ASSERT_GT(a, 0.0) << name;
    EXPECT_LE(std::abs(a - b), 0.1 * std::max(a, b)) << name;
    ++compared;
  }
  EXPECT_EQ(compared, 4);
}

TEST(Report, MissingArtifacts) {
  const fs::path d = scratch("empty");
  fs::create_directories(d);
  EXPECT_THROW(report(d.string()), MissingArtifact);
  EXPECT_THROW(report((d / "absent").string()), MissingArtifact);
}

TEST(Cli, ExitCodes) {
  const fs::path d = scratch("cli");
  write(d / "bad.toml", "J = 7\n");
  write(d / "gate.toml", "surface = \"cone:0.05\"\nlambda0 = 0.4\noutput_dir = \"" + (d / "gate").string() + "\"\n");
  fs::create_directories(d / "empty");
  EXPECT_EQ(cli("solve --config " + (d / "bad.toml").string()), 2);
  EXPECT_EQ(cli("solve --config " + (d / "missing.toml").string()), 2);
  EXPECT_EQ(cli("solve"), 2);
  EXPECT_EQ(cli("frobnicate --config x"), 2);
  EXPECT_EQ(cli("solve --config " + (d / "gate.toml").string()), 1);
  EXPECT_EQ(cli("report " + (d / "empty").string()), 1);
  EXPECT_EQ(cli("report " + solved_dir().string()), 0);
  EXPECT_EQ(cli("--help"), 0);
}
