#include "layerpot/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

#include <fftw3.h>
#include <gsl/gsl_version.h>

#include <json.hpp>

#include "layerpot/catalog.hpp"
#include "layerpot/experiments.hpp"
#include "layerpot/solver.hpp"

namespace layerpot {

namespace fs = std::filesystem;
using nlohmann::json;

std::string Check::describe() const {
  char buf[256];
  if (relation == "finite")
    std::snprintf(buf, sizeof buf, "%s = %.6g (must be finite)", name.c_str(), value);
  else
    std::snprintf(buf, sizeof buf, "%s = %.6g (must be %s %.6g)", name.c_str(), value, relation.c_str(), limit);
  return buf;
}

namespace {

constexpr const char* kVersion = "1.0.0";

// Rows of numbers under a header, written with full precision.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;  // optional leading string column
  std::string label_name;

  void write(const fs::path& path) const {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw std::runtime_error("cannot write " + path.string());
    if (!labels.empty()) std::fprintf(fp, "%s,", label_name.c_str());
    for (std::size_t c = 0; c < header.size(); ++c) std::fprintf(fp, c ? ",%s" : "%s", header[c].c_str());
    std::fprintf(fp, "\n");
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!labels.empty()) std::fprintf(fp, "%s,", labels[r].c_str());
      for (std::size_t c = 0; c < rows[r].size(); ++c) std::fprintf(fp, c ? ",%.17g" : "%.17g", rows[r][c]);
      std::fprintf(fp, "\n");
    }
    std::fclose(fp);
  }
};

class Suite {
 public:
  explicit Suite(const RunConfig& c) : cfg(c), dir(c.output_dir) {}

  const RunConfig& cfg;
  fs::path dir;
  std::vector<Check> checks;
  json extra = json::object();
  json constants = json::object();
  json ck = json::object();
  std::vector<std::string> errors;

  void le(const std::string& name, double v, double lim) { add({name, v, "<=", lim, std::isfinite(v) && v <= lim}); }
  void lt(const std::string& name, double v, double lim) { add({name, v, "<", lim, std::isfinite(v) && v < lim}); }
  void ge(const std::string& name, double v, double lim) { add({name, v, ">=", lim, std::isfinite(v) && v >= lim}); }
  void finite(const std::string& name, double v) { add({name, v, "finite", 0.0, std::isfinite(v)}); }
  void flag(const std::string& name, bool ok) { ge(name, ok ? 1.0 : 0.0, 1.0); }
  void add(Check c) { checks.push_back(std::move(c)); }
  void table(const std::string& name, const Table& t) { t.write(dir / name); }
};

// JSON has no inf or nan
json num(double v) { return std::isfinite(v) ? json(v) : json(std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf")); }

std::string num_text(const json& j) {
  if (j.is_number()) {
    char b[64];
    std::snprintf(b, sizeof b, "%g", j.get<double>());
    return b;
  }
  return j.is_string() ? j.get<std::string>() : j.dump();
}

json check_json(const Check& c) {
  json j;
  j["name"] = c.name;
  j["value"] = num(c.value);
  j["relation"] = c.relation;
  j["limit"] = num(c.limit);
  j["pass"] = c.pass;
  return j;
}

json versions() {
  json v;
  v["layerpot"] = kVersion;
#ifdef __VERSION__
  v["compiler"] = __VERSION__;
#endif
  v["cxx_standard"] = static_cast<long>(__cplusplus);
  v["gsl"] = GSL_VERSION;
  v["fftw"] = std::string(fftw_version);
  return v;
}

std::string family_of(const std::string& id) { return id.substr(0, id.find(':')); }

std::string fmt(double x) {
  char b[64];
  std::snprintf(b, sizeof b, "%g", x);
  return b;
}

// ---------------------------------------------------------------------------
// Shared set-up: grid, surface, Lambda gate, engine and constants.

struct Setting {
  GridPtr grid;
  LipschitzSurface surface = LipschitzSurface::flat();
  double lambda0 = 0.0;
  LambdaFn lambda_of;
  std::unique_ptr<OperatorEngine> engine;
  MajorantSpec spec;
  CKEstimate estimate;
};

void gate_lambda(const RunConfig& cfg, Setting& st) {
  st.lambda0 = cfg.lambda0 >= 0.0 ? cfg.lambda0 : st.surface.lambda0();
  // a given lambda0 acts as a constant bound for Lambda
  st.lambda_of = cfg.lambda0 >= 0.0 ? constant_lambda(cfg.lambda0) : lambda_of_surface(st.surface);
  if (st.lambda0 > cfg.lambda_star) throw InadmissibleLambda("lambda0 exceeds admissible threshold");
}

void describe_constants(Suite& s, const Setting& st) {
  const MajorantSpec& sp = st.spec;
  s.constants = {{"N", sp.N},     {"lambda0", st.lambda0}, {"lambda_star", sp.lambda_star}, {"c1", sp.c1},
                 {"c2", sp.c2},   {"c3", sp.c3},           {"M", sp.M},                     {"C_K", sp.C_K},
                 {"krav_lhs", sp.krav_lhs()}};
}

// Engine on the configured surface and constants from the estimated (or given) C_K.
Setting make_setting(Suite& s, bool need_engine) {
  const RunConfig& cfg = s.cfg;
  Setting st;
  st.grid = make_grid(2, cfg.r_min, cfg.r_max, cfg.J, cfg.A);
  st.surface = LipschitzSurface::from_id(cfg.surface_id);
  gate_lambda(cfg, st);
  if (need_engine) st.engine = std::make_unique<OperatorEngine>(st.grid, st.surface, cfg.ops);
  if (cfg.C_K > 0.0) {
    st.estimate.C_K = cfg.C_K;
    s.ck = {{"source", "given"}, {"C_K", cfg.C_K}};
  } else if (need_engine) {
    // E depends only on Lambda, so any admissible constants serve for the estimate
    const MajorantSpec pre = choose_constants(2, st.lambda0, 1.0, cfg.lambda_star, st.lambda_of);
    st.estimate = estimate_C_K(*st.engine, pre, cfg.ck_random, cfg.seed, cfg.p);
    s.ck = {{"source", "estimated"},
            {"C_R", st.estimate.C_R},
            {"C_E", st.estimate.C_E},
            {"psi_inv_sup", st.estimate.psi_inv_sup},
            {"C_K", st.estimate.C_K},
            {"random_fields", cfg.ck_random}};
  } else {
    st.estimate.C_K = 2.0;
    s.ck = {{"source", "default"}, {"C_K", 2.0}};
  }
  st.spec = choose_constants(2, st.lambda0, st.estimate.C_K, cfg.lambda_star, st.lambda_of);
  describe_constants(s, st);
  return st;
}

SolveConfig solve_config(const RunConfig& cfg) {
  SolveConfig sc;
  sc.tol = cfg.tol;
  sc.max_iter = cfg.max_iter;
  sc.residual_tol = cfg.residual_tol;
  sc.p = cfg.p;
  return sc;
}

Table iteration_table(const SolveReport& r) {
  Table t;
  t.header = {"n", "b_step", "residual_sup", "contraction"};
  for (const auto& rec : r.records) t.rows.push_back({double(rec.n), rec.b_step, rec.residual_sup, rec.contraction});
  return t;
}

Table probe_table(const SolveReport& r) {
  Table t;
  t.header = {"r", "seminorm", "bound", "ratio", "residual_relative"};
  for (std::size_t i = 0; i < r.probe_radii.size(); ++i)
    t.rows.push_back({r.probe_radii[i], r.solution_probe[i], r.bound_probe[i], r.bound_margins[i], r.residual_relative[i]});
  return t;
}

json solve_json(const SolveReport& r) {
  return {{"iterations", r.iterations},
          {"verdict", verdict_name(r.verdict)},
          {"final_residual_sup", num(r.final_residual_sup())},
          {"max_contraction", num(r.max_contraction())},
          {"fitted_C", num(r.fitted_C)},
          {"monotone_residual", r.monotone_residual},
          {"pv_flagged", r.diag.pv_flagged},
          {"tail_relative", num(r.diag.tail_relative)},
          {"note", r.note}};
}

// Solve assertions shared by `solve`; uniqueness when f vanishes.
void assert_solve(Suite& s, const Setting& st, const SolveReport& r, bool zero_f) {
  if (zero_f) {
    s.le("zero_source_seminorm_sup", r.solution_seminorms.sup(), 1e-8);
    return;
  }
  s.flag("converged", r.verdict == Verdict::Converged);
  s.le("final_residual_sup", r.final_residual_sup(), s.cfg.residual_tol);
  s.flag("monotone_residual", r.monotone_residual);
  s.finite("fitted_C", r.fitted_C);
  s.lt("max_contraction", r.max_contraction(), 1.0);
  // the contraction of K in the B-norm is bounded by the left side of the constant inequality
  s.le("contraction_vs_constant_margin", r.max_contraction(), st.spec.krav_lhs());
  const DecayReport d = decay_check(r.solution_seminorms, st.spec, *st.grid);
  s.extra["decay"] = {{"outer_slope", d.outer_slope},   {"outer_ceiling_slope", d.outer_ceiling_slope},
                      {"inner_slope", d.inner_slope},   {"inner_ceiling_slope", d.inner_ceiling_slope},
                      {"outer_margin", d.outer_margin}, {"inner_margin", d.inner_margin},
                      {"small_o_outer", d.small_o_outer}, {"small_o_inner", d.small_o_inner},
                      {"trivial", d.trivial}};
  s.flag("decay_outer_ceiling", d.outer_pass);
  s.flag("decay_inner_ceiling", d.inner_pass);
  s.flag("decay_small_o", d.small_o_outer && d.small_o_inner);
}

// ---------------------------------------------------------------------------

void cmd_solve(Suite& s) {
  Setting st = make_setting(s, true);
  const CatalogF cf = catalog_f(s.cfg.f_id);
  const ScalarField f = sample_f(st.grid, cf);
  const VectorField fg = sample_grad(st.grid, cf);
  const SolveResult res = picard_solve(*st.engine, f, fg, st.spec, solve_config(s.cfg));
  s.extra["solve"] = solve_json(res.report);
  assert_solve(s, st, res.report, cf.id == "zero");
  s.table("iterations.csv", iteration_table(res.report));
  s.table("probe.csv", probe_table(res.report));
  write_profile_csv((s.dir / "solution_seminorms.csv").string(), res.report.solution_seminorms);
  if (!res.report.residual_profiles.empty())
    write_profile_csv((s.dir / "residual.csv").string(), res.report.residual_profiles.back());
  write_log_profile_csv((s.dir / "grad_f_profile.csv").string(), log_seminorms(magnitude(fg), s.cfg.p));
  write_field_csv((s.dir / "u.csv").string(), res.u);
}

// Central differences of diff_kernel_grad against diff_kernel on separated pairs.
double kernel_grad_fd_error(const LipschitzSurface& surf, int n, std::uint64_t seed, int* tested) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> lr(-4.0, 4.0), ang(0.0, 2.0 * M_PI);
  double worst = 0.0;
  *tested = 0;
  while (*tested < n) {
    const double rx = std::exp2(lr(rng)), ry = std::exp2(lr(rng));
    const double ax = ang(rng), ay = ang(rng);
    const Point x{rx * std::cos(ax), rx * std::sin(ax), 0.0}, y{ry * std::cos(ay), ry * std::sin(ay), 0.0};
    const double d = distance(x, y, 2);
    // keep x away from both y and the origin, where phi may not be C^1
    if (d < 0.1 * std::max(rx, ry) || rx < 0.1 * d) continue;
    const double h = 1e-5 * d;
    double num = 0.0, den = 0.0;
    for (int k = 0; k < 2; ++k) {
      Point xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      const double fd = (diff_kernel(surf, xp, y) - diff_kernel(surf, xm, y)) / (2.0 * h);
      const double an = diff_kernel_grad(surf, x, y, k);
      num += (fd - an) * (fd - an);
      den += an * an;
    }
    ++*tested;
    if (den > 0.0) worst = std::max(worst, std::sqrt(num / den));
  }
  return worst;
}

void cmd_verify_kernels(Suite& s) {
  const LipschitzSurface surf = LipschitzSurface::from_id(s.cfg.surface_id);
  const BoundReport rep = verify_kernel_bounds(surf, s.cfg.n_samples, s.cfg.seed);
  Table t;
  t.label_name = "name";
  t.header = {"points", "max_ratio", "finite"};
  for (const auto& l : rep.lines) {
    s.finite("kernel_" + l.name, l.finite ? l.max_ratio : std::numeric_limits<double>::infinity());
    t.labels.push_back(l.name);
    t.rows.push_back({double(l.points), l.max_ratio, l.finite ? 1.0 : 0.0});
  }
  s.table("kernel_bounds.csv", t);
  s.extra["skipped_pairs"] = rep.skipped;
  // which regime labelling of the quotient bound holds with constant 1
  json lab;
  for (const char* n : {"quotients_x_gt_2y", "quotients_x_lt_2y", "quotients_y_gt_2x", "quotients_y_lt_2x"})
    lab[n] = rep.line(n).max_ratio <= 1.0;
  s.extra["regime_labelling_holds"] = lab;

  int tested = 0;
  const double fd = surf.is_flat() ? 0.0 : kernel_grad_fd_error(surf, std::min(1000, s.cfg.n_samples), s.cfg.seed, &tested);
  s.le("grad_g_vs_finite_differences", fd, 1e-6);
  s.extra["fd_pairs"] = tested;

  if (!surf.is_flat()) {
    const std::string fam = family_of(s.cfg.surface_id);
    Table sc;
    sc.header = {"eps", "g_scaled", "g_bound"};
    std::vector<double> gs;
    for (double e : s.cfg.eps_list) {
      const BoundReport re = verify_kernel_bounds(LipschitzSurface::from_id(fam + ":" + fmt(e)), s.cfg.n_samples, s.cfg.seed);
      gs.push_back(re.line("g_scaled").max_ratio);
      sc.rows.push_back({e, gs.back(), re.line("g_bound").max_ratio});
    }
    s.table("kernel_scaling.csv", sc);
    for (std::size_t i = 1; i < gs.size(); ++i) {
      const double want = std::pow(s.cfg.eps_list[i] / s.cfg.eps_list[i - 1], 2);
      const double q = gs[i - 1] > 0.0 ? gs[i] / gs[i - 1] / want : std::numeric_limits<double>::infinity();
      const std::string tag = "g_eps2_scaling_" + fmt(s.cfg.eps_list[i - 1]) + "_" + fmt(s.cfg.eps_list[i]);
      s.le(tag + "_high", q, 2.0);
      s.ge(tag + "_low", q, 0.5);
    }
  }
}

void check_lines(Suite& s, const CheckReport& r, const std::string& prefix, Table& t) {
  for (const auto& l : r.lines) {
    s.le(prefix + l.name, l.max_ratio, 1.0 + l.slack);
    t.labels.push_back(prefix + l.name);
    t.rows.push_back({double(l.points), l.max_ratio, l.slack, l.margin()});
  }
}

void cmd_verify_majorant(Suite& s) {
  Setting st = make_setting(s, false);
  Table t;
  t.label_name = "name";
  t.header = {"points", "max_ratio", "slack", "margin"};
  check_lines(s, verify_kernel_composition(st.spec, s.cfg.n_pairs, s.cfg.seed), "", t);
  const CheckReport mom = verify_sigma_moments(st.spec, 25);
  check_lines(s, mom, "", t);
  json stats;
  for (const auto& [k, v] : mom.stats) stats[k] = num(v);
  s.extra["moment_stats"] = stats;

  // K v + N_p(K(0)) <= v with K(0) = psi^{-1} R f measured on the surface
  OperatorEngine e(st.grid, st.surface, s.cfg.ops);
  const ScalarField zero(st.grid);
  for (const std::string& id : catalog_f_ids()) {
    const CatalogF cf = catalog_f(id);
    const ScalarField f = sample_f(st.grid, cf);
    const VectorField fg = sample_grad(st.grid, cf);
    const LogProfile zeta = log_seminorms(magnitude(fg), s.cfg.p);
    const LogProfile kz = log_seminorms(apply_K(e, zero, f, fg), s.cfg.p);
    check_lines(s, verify_supersolution(st.spec, zeta, kz), id + "_", t);
    write_log_profile_csv((s.dir / ("majorant_v_" + id + ".csv")).string(), majorant_v(st.spec, zeta).profile);
  }
  s.table("majorant_checks.csv", t);
}

void cmd_verify_operators(Suite& s) {
  const std::string fam = family_of(s.cfg.surface_id);
  if (fam == "flat") throw ConfigError("verify-operators needs a curved surface family (tilt, cone, wave, dini)");
  const GridPtr g = make_grid(2, s.cfg.r_min, s.cfg.r_max, s.cfg.J, s.cfg.A);
  const double r = s.cfg.r0.front();
  const OperatorNormReport rep =
      empirical_operator_norms(g, fam, r, s.cfg.n_trials, s.cfg.eps_list, s.cfg.seed, s.cfg.p, s.cfg.ops);
  Table t;
  t.header = {"eps", "lambda", "diff_ratio", "tn1_ratio"};
  for (const auto& row : rep.rows) t.rows.push_back({row.eps, row.lambda, row.diff_ratio, row.tn1_ratio});
  s.table("operator_norms.csv", t);
  s.extra["ball_radius"] = r;
  s.ge("diff_exponent_low", rep.diff_exponent, 1.6);
  s.le("diff_exponent_high", rep.diff_exponent, 2.4);
  s.ge("tn1_exponent_low", rep.tn1_exponent, 0.7);
  s.le("tn1_exponent_high", rep.tn1_exponent, 1.3);
}

void cmd_local(Suite& s) {
  Setting st = make_setting(s, true);
  const SolveConfig sc = solve_config(s.cfg);
  const std::vector<std::string> ids = s.cfg.f_id == "catalog" ? catalog_f_ids() : std::vector<std::string>{s.cfg.f_id};
  Table t;
  t.label_name = "f";
  t.header = {"r0", "moment_relative", "w_match_relative", "fitted_C", "scaled_inner", "scaled_middle",
              "scaled_outer", "inner", "middle", "outer"};
  // scaled regime constants, max over f, per r0
  std::vector<std::array<double, 3>> per_r0(s.cfg.r0.size(), {0.0, 0.0, 0.0});
  for (const std::string& id : ids) {
    const CatalogF cf = catalog_f(id);
    const ScalarField f = sample_f(st.grid, cf);
    const VectorField fg = sample_grad(st.grid, cf);
    const SolveResult u = picard_solve(*st.engine, f, fg, st.spec, sc);
    s.flag(id + "_solve_converged", u.report.verdict == Verdict::Converged);
    for (std::size_t k = 0; k < s.cfg.r0.size(); ++k) {
      const double r0 = s.cfg.r0[k];
      const LocalEstimateReport L = local_estimate_experiment(*st.engine, u.u, f, fg, r0, st.spec, sc);
      const std::string tag = id + "_r0_" + fmt(r0) + "_";
      if (!L.trivial) {
        s.le(tag + "moment_relative", L.moment_relative, 1e-6);
        s.le(tag + "w_match_relative", L.w_match_relative, 2e-2);
        s.finite(tag + "fitted_C", L.fitted_C);
      }
      const CommutatorRegimes& R = L.regimes;
      per_r0[k] = {std::max(per_r0[k][0], R.scaled_inner), std::max(per_r0[k][1], R.scaled_middle),
                   std::max(per_r0[k][2], R.scaled_outer)};
      t.labels.push_back(id);
      t.rows.push_back({r0, L.moment_relative, L.w_match_relative, L.fitted_C, R.scaled_inner, R.scaled_middle,
                        R.scaled_outer, R.inner, R.middle, R.outer});
      Table b;
      b.header = {"r", "seminorm", "bound", "ratio"};
      for (std::size_t i = 0; i < L.radii.size(); ++i) {
        const double tot = L.bounds[i].total();
        b.rows.push_back({L.radii[i], L.u_seminorms[i], tot, tot > 0.0 ? L.u_seminorms[i] / tot : 0.0});
      }
      s.table("local_bound_" + id + "_r0_" + fmt(r0) + ".csv", b);
    }
  }
  s.table("local.csv", t);
  const char* names[3] = {"inner", "middle", "outer"};
  json reg;
  for (int j = 0; j < 3; ++j) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& c : per_r0) {
      lo = std::min(lo, c[j]);
      hi = std::max(hi, c[j]);
      reg[names[j]].push_back(c[j]);
    }
    s.finite(std::string("regime_") + names[j] + "_constant", hi);
    if (per_r0.size() > 1) s.le(std::string("regime_") + names[j] + "_spread", lo > 0.0 ? hi / lo : INFINITY, 1.5);
  }
  s.extra["regime_constants_per_r0"] = reg;
}

void cmd_alpha_decay(Suite& s) {
  Setting st = make_setting(s, true);
  const SolveConfig sc = solve_config(s.cfg);
  const AlphaDecayReport a =
      alpha_decay_experiment(*st.engine, s.cfg.alpha, st.spec, s.cfg.r0.front(), s.cfg.source_r0, sc);
  s.ge("alpha_inner_slope", a.inner_slope, a.slope_floor);
  s.flag("alpha_solve_not_diverged", a.solve.verdict != Verdict::Diverged);
  s.finite("alpha_fitted_C", a.solve.fitted_C);
  s.extra["alpha"] = {{"alpha", a.alpha},
                      {"inner_slope", a.inner_slope},
                      {"slope_floor", a.slope_floor},
                      {"threshold_radius", a.threshold_radius},
                      {"solve", solve_json(a.solve)},
                      {"local_fitted_C", a.local.fitted_C},
                      {"local_w_match_relative", a.local.w_match_relative}};
  write_profile_csv((s.dir / "alpha_seminorms.csv").string(), a.solve.solution_seminorms);
  s.table("iterations.csv", iteration_table(a.solve));
  s.table("probe.csv", probe_table(a.solve));
  if (st.surface.kind() == SurfaceKind::Dini) {
    const DiniReport d = dini_experiment(*st.engine, s.cfg.f_id, st.spec, sc);
    s.le("dini_max_over_median", d.max_over_median, 2.0);
    s.ge("dini_min_over_median", d.min_over_median, 0.5);
    s.extra["dini"] = {{"median", d.median}, {"solve", solve_json(d.solve)}};
    Table t;
    t.header = {"r", "seminorm"};
    for (std::size_t i = 0; i < d.radii.size(); ++i) t.rows.push_back({d.radii[i], d.values[i]});
    s.table("dini.csv", t);
  }
}

void cmd_flat_oracle(Suite& s) {
  const GridPtr g = make_grid(2, s.cfg.r_min, s.cfg.r_max, s.cfg.J, s.cfg.A);
  OperatorEngine e(g, LipschitzSurface::flat(), s.cfg.ops);
  const OracleCalibration cal = calibrate_multiplier_oracle(e);
  s.extra["calibration"] = {{"i_scale", cal.i_scale}, {"r_scale", cal.r_scale}, {"r_convention", cal.r_convention}};
  Table t;
  t.label_name = "field";
  t.header = {"r", "err_I", "err_R1", "err_R2"};
  struct G {
    const char* name;
    double a, cx;
  };
  for (const G gs : {G{"gauss_a1", 1.0, 0.3}, G{"gauss_a0.5", 0.5, 0.3}, G{"gauss_a2", 2.0, -0.2}}) {
    const ScalarField u = ScalarField::sample(g, [gs](const Point& x) {
      return std::exp(-gs.a * ((x[0] - gs.cx) * (x[0] - gs.cx) + x[1] * x[1]));
    });
    const ScalarField qi = e.apply_all(Family::Riesz, u)[0];
    const std::vector<ScalarField> qr = e.apply_all(Family::RieszPV, u);
    const OracleResult oi = flat_multiplier_oracle(u, MultiplierOp::I, &cal);
    const OracleResult o1 = flat_multiplier_oracle(u, MultiplierOp::R1, &cal);
    const OracleResult o2 = flat_multiplier_oracle(u, MultiplierOp::R2, &cal);
    const SeminormProfile ei = seminorm_profile(qi - oi.field, s.cfg.p), ni = seminorm_profile(oi.field, s.cfg.p);
    const SeminormProfile e1 = seminorm_profile(qr[0] - o1.field, s.cfg.p), n1 = seminorm_profile(o1.field, s.cfg.p);
    const SeminormProfile e2 = seminorm_profile(qr[1] - o2.field, s.cfg.p), n2 = seminorm_profile(o2.field, s.cfg.p);
    double mi = 0.0, m1 = 0.0, m2 = 0.0;
    for (double r : g->probe_radii()) {
      if (2.0 * r > oi.valid_radius) continue;
      const double a = ei.at(r) / ni.at(r), b = e1.at(r) / n1.at(r), c = e2.at(r) / n2.at(r);
      mi = std::max(mi, a);
      m1 = std::max(m1, b);
      m2 = std::max(m2, c);
      t.labels.push_back(gs.name);
      t.rows.push_back({r, a, b, c});
    }
    const std::string tag = gs.name;
    s.le(tag + "_riesz_potential", mi, 1e-2);
    s.le(tag + "_riesz_transform_1", m1, 1e-2);
    s.le(tag + "_riesz_transform_2", m2, 1e-2);
    s.le(tag + "_riesz_square_identity", oracle_riesz_square_error(u, cal), 1e-2);
  }
  s.table("oracle.csv", t);
}

void dispatch(Suite& s) {
  const std::string& c = s.cfg.command;
  if (c == "solve") return cmd_solve(s);
  if (c == "verify-kernels") return cmd_verify_kernels(s);
  if (c == "verify-majorant") return cmd_verify_majorant(s);
  if (c == "verify-operators") return cmd_verify_operators(s);
  if (c == "local") return cmd_local(s);
  if (c == "alpha-decay") return cmd_alpha_decay(s);
  if (c == "flat-oracle") return cmd_flat_oracle(s);
  throw ConfigError("unknown command '" + c + "'");
}

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("output_dir " + dir.string() + " cannot be created: " + ec.message());
  const fs::path probe = dir / ".write_test";
  {
    std::ofstream o(probe);
    if (!o) throw ConfigError("output_dir " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

std::string render_csv(const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream o;
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      char b[64];
      char* end = nullptr;
      const double v = std::strtod(r[c].c_str(), &end);
      if (end && *end == '\0' && !r[c].empty())
        std::snprintf(b, sizeof b, " %17.6g", v);
      else
        std::snprintf(b, sizeof b, " %17s", r[c].c_str());
      o << b;
    }
    o << "\n";
  }
  return o.str();
}

}  // namespace

RunOutcome run(const RunConfig& cfg) {
  RunOutcome out;
  out.output_dir = cfg.output_dir;
  const auto t0 = std::chrono::steady_clock::now();
  Suite s(cfg);
  try {
    cfg.validate();
    prepare_dir(s.dir);
  } catch (const ConfigError& e) {
    out.exit_code = 2;
    out.failures.push_back(std::string("configuration: ") + e.what());
    out.summary = out.failures.back();
    return out;
  }

  try {
    dispatch(s);
  } catch (const ConfigError& e) {
    s.errors.push_back(std::string("configuration: ") + e.what());
    out.exit_code = 2;
  } catch (const InadmissibleLambda& e) {
    s.errors.push_back(e.what());
  } catch (const std::exception& e) {
    s.errors.push_back(std::string("error: ") + e.what());
  }
  out.checks = s.checks;
  for (const auto& c : s.checks)
    if (!c.pass) out.failures.push_back(c.describe());
  for (const auto& e : s.errors) out.failures.push_back(e);
  if (out.exit_code == 0 && !out.failures.empty()) out.exit_code = 1;

  json m;
  m["config"] = json::parse(config_to_json(cfg));
  m["constants"] = s.constants;
  m["C_K_estimate"] = s.ck;
  m["versions"] = versions();
  m["status"] = out.exit_code == 0 ? "pass" : "fail";
  m["exit_code"] = out.exit_code;
  m["failures"] = out.failures;
  m["checks"] = json::array();
  for (const auto& c : s.checks) m["checks"].push_back(check_json(c));
  m["results"] = s.extra;
  m["elapsed_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  {
    std::ofstream o(s.dir / "manifest.json");
    o << m.dump(2) << "\n";
  }
  {
    std::ofstream o(s.dir / "failures.txt");
    for (const auto& f : out.failures) o << f << "\n";
  }
  out.summary = report(cfg.output_dir).text;
  std::ofstream(s.dir / "report.txt") << out.summary;
  return out;
}

RunReport report(const std::string& dir) {
  const fs::path d(dir);
  const fs::path mp = d / "manifest.json";
  if (!fs::is_directory(d)) throw MissingArtifact("run directory " + dir + " does not exist");
  if (!fs::exists(mp)) throw MissingArtifact("no manifest.json in " + dir);
  json m;
  try {
    std::ifstream in(mp);
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw MissingArtifact("unreadable manifest in " + dir + ": " + e.what());
  }
  RunReport rep;
  std::ostringstream o;
  const json& c = m.at("config");
  o << "command  " << c.value("command", "?") << "\n";
  o << "surface  " << c.value("surface", "?") << "    f " << c.value("f", "?") << "    seed " << c.value("seed", 0) << "\n";
  o << "status   " << m.value("status", "?") << " (exit " << m.value("exit_code", -1) << ")\n";
  if (m.contains("constants") && !m["constants"].empty()) {
    o << "constants";
    for (auto it = m["constants"].begin(); it != m["constants"].end(); ++it) o << "  " << it.key() << "=" << it.value();
    o << "\n";
  }
  if (m.contains("C_K_estimate") && !m["C_K_estimate"].empty()) o << "C_K      " << m["C_K_estimate"].dump() << "\n";
  const json res = m.value("results", json::object());
  if (res.contains("solve"))
    o << "solve    " << res["solve"].value("iterations", 0) << " iteration(s), verdict "
      << res["solve"].value("verdict", "?") << "\n";
  o << "\nchecks\n";
  for (const auto& ch : m.value("checks", json::array())) {
    char b[256];
    const std::string rel = ch.value("relation", "");
    std::snprintf(b, sizeof b, "  %-4s %-48s %14s  %-6s %s\n", ch.value("pass", false) ? "ok" : "FAIL",
                  ch.value("name", "").c_str(), num_text(ch["value"]).c_str(), rel.c_str(),
                  rel == "finite" ? "" : num_text(ch["limit"]).c_str());
    o << b;
  }
  const auto fails = m.value("failures", std::vector<std::string>{});
  if (!fails.empty()) {
    o << "\nfailures\n";
    for (const auto& f : fails) o << "  " << f << "\n";
  }
  if (fs::exists(d / "probe.csv")) {
    const auto rows = read_csv(d / "probe.csv");
    rep.probe_rows = rows.empty() ? 0 : rows.size() - 1;
    o << "\nper-radius table (probe.csv)\n" << render_csv(rows);
  }
  if (fs::exists(d / "iterations.csv")) {
    const auto rows = read_csv(d / "iterations.csv");
    rep.iteration_rows = rows.empty() ? 0 : rows.size() - 1;
    o << "\nper-iteration table (iterations.csv)\n" << render_csv(rows);
  }
  rep.text = o.str();
  return rep;
}

}  // namespace layerpot
