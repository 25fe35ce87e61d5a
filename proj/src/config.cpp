#include "layerpot/config.hpp"

#include "layerpot/catalog.hpp"
#include "layerpot/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include <json.hpp>

namespace layerpot {

using nlohmann::json;

const std::vector<std::string>& RunConfig::commands() {
  static const std::vector<std::string> c{"solve", "verify-kernels", "verify-majorant", "verify-operators",
                                          "local", "alpha-decay", "flat-oracle"};
  return c;
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void RunConfig::validate() const {
  const auto& c = commands();
  require(std::find(c.begin(), c.end(), command) != c.end(), "unknown command '" + command + "'");
  try {
    (void)LipschitzSurface::from_id(surface_id);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("surface: ") + e.what());
  }
  require(r_min > 0.0 && r_max > 0.0, "r_min and r_max must be positive");
  require(J >= 4 && J <= 64 && J % 2 == 0, "J must be even and in [4, 64]");
  const double oct = std::log2(r_max / r_min);
  require(std::abs(oct - std::round(oct)) < 1e-9 && oct >= 8.0 && oct <= 24.0,
          "r_max / r_min must be a power of two with 8 to 24 octaves");
  require(A >= 16 && A <= 512 && A % 2 == 0, "A must be even and in [16, 512]");
  require(std::isfinite(p) && p > 1.0 && p <= 16.0, "p must lie in (1, 16]");
  require(tol > 0.0 && tol < 1.0, "tol must lie in (0, 1)");
  require(max_iter >= 1 && max_iter <= 10000, "max_iter must lie in [1, 10000]");
  require(residual_tol > 0.0, "residual_tol must be positive");
  require(lambda_star > 0.0 && lambda_star < 0.5, "lambda_star must lie in (0, 0.5)");
  require(lambda0 < 0.0 || lambda0 <= 1.0, "lambda0 must lie in [0, 1] when given");
  require(C_K < 0.0 || C_K > 0.0, "C_K must be positive when given");
  require(ck_random >= 0 && n_pairs >= 1 && n_samples >= 1 && n_trials >= 1, "sample counts must be positive");
  require(eps_list.size() >= 2, "eps_list needs at least two amplitudes");
  for (double e : eps_list) require(e > 0.0 && e <= 0.2, "eps_list entries must lie in (0, 0.2]");
  require(!r0.empty(), "r0 must not be empty");
  for (double r : r0) require(r >= 4.0 * r_min && 8.0 * r <= r_max, "every r0 needs 4 r_min <= r0 and 2 r0 <= r_max / 4");
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
  require(source_r0 >= 4.0 * r_min && 8.0 * source_r0 <= r_max, "source_r0 must lie inside the probe window");
  if ((command == "solve" || command == "local" || command == "alpha-decay") && !(command == "local" && f_id == "catalog")) {
    try {
      (void)catalog_f(f_id);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("f: ") + e.what());
    }
  }
  try {
    ops.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("operators: ") + e.what());
  }
}

bool RunConfig::operator==(const RunConfig& o) const { return config_to_json(*this) == config_to_json(o); }

namespace {

json to_json_obj(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  j["surface"] = c.surface_id;
  j["f"] = c.f_id;
  j["r_min"] = c.r_min;
  j["r_max"] = c.r_max;
  j["J"] = c.J;
  j["A"] = c.A;
  j["p"] = c.p;
  j["tol"] = c.tol;
  j["max_iter"] = c.max_iter;
  j["residual_tol"] = c.residual_tol;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["lambda_star"] = c.lambda_star;
  j["lambda0"] = c.lambda0;
  j["C_K"] = c.C_K;
  j["ck_random"] = c.ck_random;
  j["n_pairs"] = c.n_pairs;
  j["n_samples"] = c.n_samples;
  j["n_trials"] = c.n_trials;
  j["eps_list"] = c.eps_list;
  j["r0"] = c.r0;
  j["alpha"] = c.alpha;
  j["source_r0"] = c.source_r0;
  json o;
  o["pv_epsilon_factor"] = c.ops.pv_epsilon_factor;
  o["pv_extrapolation_levels"] = c.ops.pv_extrapolation_levels;
  o["near_singular_refinement"] = c.ops.near_singular_refinement;
  o["near_radius_factor"] = c.ops.near_radius_factor;
  o["window_flat"] = c.ops.window_flat;
  o["near_angular_nodes"] = c.ops.near_angular_nodes;
  o["panel_order"] = c.ops.panel_order;
  o["tail_order"] = c.ops.tail_order;
  o["tail_correction"] = c.ops.tail_correction;
  j["operators"] = o;
  return j;
}

// A minimal key/value view shared by the TOML and JSON readers.
struct Reader {
  virtual ~Reader() = default;
  virtual bool has(const std::string& k) const = 0;
  virtual double num(const std::string& k) const = 0;
  virtual std::int64_t integer(const std::string& k) const = 0;
  virtual std::string str(const std::string& k) const = 0;
  virtual bool boolean(const std::string& k) const = 0;
  virtual std::vector<double> nums(const std::string& k) const = 0;
  virtual std::vector<std::string> keys() const = 0;
};

const std::set<std::string>& top_keys() {
  static const std::set<std::string> k{"command", "surface", "f", "r_min", "r_max", "J", "A", "p", "tol",
                                       "max_iter", "residual_tol", "seed", "output_dir", "lambda_star",
                                       "lambda0", "C_K", "ck_random", "n_pairs", "n_samples", "n_trials",
                                       "eps_list", "r0", "alpha", "source_r0", "operators"};
  return k;
}

const std::set<std::string>& op_keys() {
  static const std::set<std::string> k{"pv_epsilon_factor", "pv_extrapolation_levels", "near_singular_refinement",
                                       "near_radius_factor", "window_flat", "near_angular_nodes",
                                       "panel_order", "tail_order", "tail_correction"};
  return k;
}

void read_ops(const Reader& r, OperatorConfig& o) {
  for (const auto& k : r.keys()) require(op_keys().count(k) > 0, "unknown key operators." + k);
  if (r.has("pv_epsilon_factor")) o.pv_epsilon_factor = r.num("pv_epsilon_factor");
  if (r.has("pv_extrapolation_levels")) o.pv_extrapolation_levels = static_cast<int>(r.integer("pv_extrapolation_levels"));
  if (r.has("near_singular_refinement")) o.near_singular_refinement = static_cast<int>(r.integer("near_singular_refinement"));
  if (r.has("near_radius_factor")) o.near_radius_factor = r.num("near_radius_factor");
  if (r.has("window_flat")) o.window_flat = r.num("window_flat");
  if (r.has("near_angular_nodes")) o.near_angular_nodes = static_cast<int>(r.integer("near_angular_nodes"));
  if (r.has("panel_order")) o.panel_order = static_cast<int>(r.integer("panel_order"));
  if (r.has("tail_order")) o.tail_order = static_cast<int>(r.integer("tail_order"));
  if (r.has("tail_correction")) o.tail_correction = r.boolean("tail_correction");
}

void read_top(const Reader& r, RunConfig& c) {
  for (const auto& k : r.keys()) require(top_keys().count(k) > 0, "unknown key " + k);
  if (r.has("command")) {
    const std::string cmd = r.str("command");
    require(c.command.empty() || c.command == cmd, "config is for '" + cmd + "', not '" + c.command + "'");
    c.command = cmd;
  }
  require(!c.command.empty(), "missing key command");
  if (r.has("surface")) c.surface_id = r.str("surface");
  if (r.has("f")) c.f_id = r.str("f");
  if (r.has("r_min")) c.r_min = r.num("r_min");
  if (r.has("r_max")) c.r_max = r.num("r_max");
  if (r.has("J")) c.J = static_cast<int>(r.integer("J"));
  if (r.has("A")) c.A = static_cast<int>(r.integer("A"));
  if (r.has("p")) c.p = r.num("p");
  if (r.has("tol")) c.tol = r.num("tol");
  if (r.has("max_iter")) c.max_iter = static_cast<int>(r.integer("max_iter"));
  if (r.has("residual_tol")) c.residual_tol = r.num("residual_tol");
  if (r.has("seed")) {
    const std::int64_t s = r.integer("seed");
    require(s >= 0, "seed must be nonnegative");
    c.seed = static_cast<std::uint64_t>(s);
  }
  if (r.has("output_dir")) c.output_dir = r.str("output_dir");
  if (r.has("lambda_star")) c.lambda_star = r.num("lambda_star");
  if (r.has("lambda0")) c.lambda0 = r.num("lambda0");
  if (r.has("C_K")) c.C_K = r.num("C_K");
  if (r.has("ck_random")) c.ck_random = static_cast<int>(r.integer("ck_random"));
  if (r.has("n_pairs")) c.n_pairs = static_cast<int>(r.integer("n_pairs"));
  if (r.has("n_samples")) c.n_samples = static_cast<int>(r.integer("n_samples"));
  if (r.has("n_trials")) c.n_trials = static_cast<int>(r.integer("n_trials"));
  if (r.has("eps_list")) c.eps_list = r.nums("eps_list");
  if (r.has("r0")) c.r0 = r.nums("r0");
  if (r.has("alpha")) c.alpha = r.num("alpha");
  if (r.has("source_r0")) c.source_r0 = r.num("source_r0");
}

struct TomlReader : Reader {
  const toml::table& t;
  explicit TomlReader(const toml::table& tab) : t(tab) {}
  const toml::node& at(const std::string& k) const { return *t.get(k); }
  bool has(const std::string& k) const override { return t.contains(k); }
  double num(const std::string& k) const override {
    const auto& n = at(k);
    if (auto v = n.value<double>()) return *v;
    throw ConfigError("key " + k + " must be a number");
  }
  std::int64_t integer(const std::string& k) const override {
    const auto& n = at(k);
    if (!n.is_integer()) throw ConfigError("key " + k + " must be an integer");
    return *n.value<std::int64_t>();
  }
  std::string str(const std::string& k) const override {
    const auto& n = at(k);
    if (!n.is_string()) throw ConfigError("key " + k + " must be a string");
    return *n.value<std::string>();
  }
  bool boolean(const std::string& k) const override {
    const auto& n = at(k);
    if (!n.is_boolean()) throw ConfigError("key " + k + " must be a boolean");
    return *n.value<bool>();
  }
  std::vector<double> nums(const std::string& k) const override {
    const auto& n = at(k);
    std::vector<double> out;
    if (auto v = n.value<double>()) return {*v};
    const toml::array* a = n.as_array();
    if (!a) throw ConfigError("key " + k + " must be a number or an array of numbers");
    for (const auto& e : *a) {
      auto v = e.value<double>();
      if (!v) throw ConfigError("key " + k + " must hold numbers");
      out.push_back(*v);
    }
    return out;
  }
  std::vector<std::string> keys() const override {
    std::vector<std::string> k;
    for (const auto& [key, val] : t) k.emplace_back(key.str());
    return k;
  }
};

struct JsonReader : Reader {
  const json& j;
  explicit JsonReader(const json& o) : j(o) {}
  bool has(const std::string& k) const override { return j.contains(k); }
  double num(const std::string& k) const override {
    if (!j.at(k).is_number()) throw ConfigError("key " + k + " must be a number");
    return j.at(k).get<double>();
  }
  std::int64_t integer(const std::string& k) const override {
    if (!j.at(k).is_number_integer()) throw ConfigError("key " + k + " must be an integer");
    return j.at(k).get<std::int64_t>();
  }
  std::string str(const std::string& k) const override {
    if (!j.at(k).is_string()) throw ConfigError("key " + k + " must be a string");
    return j.at(k).get<std::string>();
  }
  bool boolean(const std::string& k) const override {
    if (!j.at(k).is_boolean()) throw ConfigError("key " + k + " must be a boolean");
    return j.at(k).get<bool>();
  }
  std::vector<double> nums(const std::string& k) const override {
    const json& v = j.at(k);
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array()) throw ConfigError("key " + k + " must be a number or an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError("key " + k + " must hold numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  std::vector<std::string> keys() const override {
    std::vector<std::string> k;
    for (auto it = j.begin(); it != j.end(); ++it) k.push_back(it.key());
    return k;
  }
};

}  // namespace

RunConfig parse_toml_config(const std::string& text, const std::string& command) {
  toml::table t;
  try {
    t = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream o;
    o << "TOML parse error: " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(o.str());
  }
  RunConfig c;
  c.command = command;
  read_top(TomlReader(t), c);
  if (t.contains("operators")) {
    const toml::table* ot = t.get("operators")->as_table();
    require(ot != nullptr, "operators must be a table");
    read_ops(TomlReader(*ot), c.ops);
  }
  c.validate();
  return c;
}

RunConfig config_from_json(const std::string& json_text, const std::string& command) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("JSON parse error: ") + e.what());
  }
  if (j.contains("config")) j = j.at("config");
  require(j.is_object(), "manifest config must be an object");
  RunConfig c;
  c.command = command;
  read_top(JsonReader(j), c);
  if (j.contains("operators")) {
    require(j.at("operators").is_object(), "operators must be an object");
    read_ops(JsonReader(j.at("operators")), c.ops);
  }
  c.validate();
  return c;
}

std::string config_to_json(const RunConfig& c) { return to_json_obj(c).dump(2); }

RunConfig load_config(const std::string& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const bool is_json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  return is_json ? config_from_json(ss.str(), command) : parse_toml_config(ss.str(), command);
}

}  // namespace layerpot
