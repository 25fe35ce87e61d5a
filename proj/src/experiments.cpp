#include "layerpot/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace layerpot {

namespace {

// Dyadic radii of [4 r_min, r_max / 4] and the profile there.
void window_of(const SeminormProfile& prof, const AnnularGrid& g, std::vector<double>& r, std::vector<double>& v) {
  for (std::size_t k = 0; k < prof.radii.size(); ++k) {
    const double rr = prof.radii[k];
    if (rr >= 4.0 * g.r_min() * (1 - 1e-12) && 2.0 * rr <= g.r_max() / 4.0 * (1 + 1e-12)) {
      r.push_back(rr);
      v.push_back(prof.values[k]);
    }
  }
}

double fit_slope(const std::vector<double>& r, const std::vector<double>& v) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double x = std::log(r[i]), y = std::log(std::max(v[i], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double safe_ratio(double a, double b) {
  if (a <= 0.0) return 0.0;
  return b > 0.0 ? a / b : std::numeric_limits<double>::infinity();
}

}  // namespace

LocalEstimateReport local_estimate_experiment(const OperatorEngine& e, const ScalarField& u, const ScalarField& f,
                                              const VectorField& f_grad, double r0, const MajorantSpec& spec,
                                              const SolveConfig& cfg) {
  const AnnularGrid& g = e.grid();
  if (!(r0 > 0.0) || r0 < 4.0 * g.r_min() || 2.0 * r0 > g.r_max() / 4.0)
    throw std::invalid_argument("local_estimate_experiment: r0 and 2 r0 must lie inside the probe window");
  LocalEstimateReport rep;
  rep.r0 = r0;
  const GridPtr& gp = e.grid_ptr();
  if (u.max_abs() == 0.0 && f.max_abs() == 0.0) {
    rep.trivial = true;
    return rep;
  }

  const CorrectionSpec corr = commutator_correction(u, e.surface(), r0);
  double gmax = 0.0, mres = 0.0;
  for (std::size_t k = 0; k < corr.gamma.size(); ++k) {
    gmax = std::max(gmax, std::abs(corr.gamma[k]));
    mres = std::max(mres, std::abs(corr.moment_residual[k]));
  }
  rep.moment_relative = gmax > 0.0 ? mres / gmax : mres;

  // right-hand side eta f + [S, eta] u + S Psi and its gradient
  const ScalarField comm = commutator_field(e, u, corr);
  const VectorField comm_grad = commutator_field_grad(e, u, corr);
  ScalarField F = hadamard(corr.eta, f) + comm;
  VectorField F_grad;
  for (int k = 0; k < g.dim(); ++k) {
    ScalarField deta(gp);
    for (std::size_t i = 0; i < deta.size(); ++i) {
      const Point x = g.node(i);
      const double rho = g.radius(g.shell_of(i));
      deta[i] = cutoff_eta_deriv(rho, r0) * x[k] / rho;
    }
    F_grad.push_back(hadamard(deta, f) + hadamard(corr.eta, f_grad[k]) + comm_grad[k]);
  }
  SolveResult w = picard_solve(e, F, F_grad, spec, cfg);
  rep.w_solve = w.report;
  const ScalarField target = hadamard(corr.eta, u) + corr.psi_corr;
  rep.w_match_relative =
      safe_ratio(seminorm_profile(w.u - target, cfg.p).sup(), seminorm_profile(target, cfg.p).sup());

  // local bound below r0
  rep.u_xp_norm = xp_norm(u, cfg.p).total();
  const LogProfile zeta = log_seminorms(magnitude(f_grad), cfg.p);
  const LogProfile fz = log_seminorms(f, cfg.p);
  const SeminormProfile up = seminorm_profile(u, cfg.p);
  for (double r : g.probe_radii()) {
    if (r >= r0) continue;
    const LocalBound b = bound_local(spec, zeta, rep.u_xp_norm, fz, r, r0);
    rep.radii.push_back(r);
    rep.u_seminorms.push_back(up.at(r));
    rep.bounds.push_back(b);
    rep.fitted_C = std::max(rep.fitted_C, safe_ratio(up.at(r), b.total()));
  }

  // commutator gradient regimes on the dyadic probe window
  std::vector<double> rr, qv;
  window_of(seminorm_profile(magnitude(comm_grad), cfg.p), g, rr, qv);
  const double xn = rep.u_xp_norm;
  const int N = g.dim();
  double m_out = 0.0, mass_in = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double rho = g.radius(g.shell_of(i));
    if (rho > r0) m_out += g.weight(i) * std::abs(u[i]) / std::pow(rho, N);
    if (rho < 2.0 * r0) mass_in += g.weight(i) * std::abs(u[i]);
  }
  const LogProfile uz = log_seminorms(u, cfg.p);
  auto local_mass = [&](double r) {
    // int Q_{N,1}(rho / r) N_p(u; rho) d rho / rho on the t-grid
    const double t = -std::log(r), h = uz.step();
    double acc = 0.0;
    for (std::size_t k = 0; k < uz.size(); ++k) {
      const double x = std::exp(t - uz.t[k]);
      const double w = (k == 0 || k + 1 == uz.size()) ? 0.5 * h : h;
      acc += w * (x <= 1.0 ? std::pow(x, N) : x) * uz.values[k];
    }
    return acc;
  };
  CommutatorRegimes& R = rep.regimes;
  for (std::size_t i = 0; i < rr.size(); ++i) {
    const double r = rr[i];
    const double lam = e.surface().lip(r);
    if (r < 0.5 * r0) {
      R.inner = std::max(R.inner, safe_ratio(qv[i], (r + lam) * xn));
      R.scaled_inner = std::max(R.scaled_inner, safe_ratio(qv[i], (r / r0 + lam) * m_out));
      ++R.inner_points;
    } else if (r <= 4.0 * r0) {
      R.middle = std::max(R.middle, safe_ratio(qv[i], xn));
      R.scaled_middle = std::max(R.scaled_middle, safe_ratio(qv[i], (r / r0) * local_mass(r) + m_out));
      ++R.middle_points;
    } else {
      const double rn = std::pow(r, N);
      R.outer = std::max(R.outer, safe_ratio(qv[i] * rn, xn));
      R.scaled_outer = std::max(R.scaled_outer, safe_ratio(qv[i] * rn, mass_in + std::pow(r0, N) * m_out));
      ++R.outer_points;
    }
  }
  return rep;
}

CatalogF alpha_source(double alpha, double r0, double r_min) {
  CatalogF f;
  char buf[64];
  std::snprintf(buf, sizeof buf, "alpha:%g", alpha);
  f.id = buf;
  const double r_freeze = 2.0 * r_min;
  // the cut-off falls from 1 to 0 across [r0/4, 2 r0], smooth in log rho so
  // that the grid resolves it
  const double lo = std::log(0.25 * r0), span = std::log(8.0);
  auto cut = [=](double r) { return cutoff_eta(1.0 + (std::log(r) - lo) / span, 1.0); };
  auto dcut = [=](double r) { return cutoff_eta_deriv(1.0 + (std::log(r) - lo) / span, 1.0) / (r * span); };
  auto rad = [](const Point& x) { return std::hypot(x[0], x[1]); };
  f.value = [=](const Point& x) {
    const double r = std::max(rad(x), r_freeze);
    return std::pow(r, 1.0 - alpha) * cut(r);
  };
  for (int k = 0; k < 2; ++k)
    f.grad.push_back([=](const Point& x) {
      const double r = rad(x);
      if (r < r_freeze) return 0.0;
      const double dr = (1.0 - alpha) * std::pow(r, -alpha) * cut(r) + std::pow(r, 1.0 - alpha) * dcut(r);
      return dr * x[k] / r;
    });
  return f;
}

AlphaDecayReport alpha_decay_experiment(const OperatorEngine& e, double alpha, const MajorantSpec& spec, double r0,
                                        double source_r0, const SolveConfig& cfg) {
  if (!(alpha > 0.0 && alpha < spec.M)) throw std::invalid_argument("alpha_decay_experiment: need 0 < alpha < M");
  const AnnularGrid& g = e.grid();
  AlphaDecayReport rep;
  rep.alpha = alpha;
  rep.r0 = r0;
  rep.source_r0 = source_r0;
  rep.slope_floor = -alpha - 0.2;
  const double thr = alpha / (2.0 * spec.c1);
  for (int j = 0; j < g.n_radial(); ++j)
    if (e.surface().lip(g.radius(j)) <= thr) rep.threshold_radius = g.radius(j);

  const CatalogF src = alpha_source(alpha, source_r0, g.r_min());
  const ScalarField f = sample_f(e.grid_ptr(), src);
  const VectorField fg = sample_grad(e.grid_ptr(), src);
  SolveResult s = picard_solve(e, f, fg, spec, cfg);
  rep.solve = s.report;
  rep.local = local_estimate_experiment(e, s.u, f, fg, r0, spec, cfg);

  std::vector<double> r, v;
  window_of(s.report.solution_seminorms, g, r, v);
  const std::size_t n = std::min<std::size_t>(r.size(), 2 * g.radial_per_octave() + 1);
  r.resize(n);
  v.resize(n);
  rep.inner_slope = fit_slope(r, v);
  rep.slope_pass = rep.inner_slope >= rep.slope_floor;
  return rep;
}

DiniReport dini_experiment(const OperatorEngine& e, const std::string& f_id, const MajorantSpec& spec,
                           const SolveConfig& cfg) {
  const AnnularGrid& g = e.grid();
  const CatalogF cf = catalog_f(f_id, g.dim());
  const ScalarField f = sample_f(e.grid_ptr(), cf);
  const VectorField fg = sample_grad(e.grid_ptr(), cf);
  SolveResult s = picard_solve(e, f, fg, spec, cfg);
  DiniReport rep;
  rep.solve = s.report;
  std::vector<double> r, v;
  window_of(s.report.solution_seminorms, g, r, v);
  const std::size_t n = std::min<std::size_t>(r.size(), 2 * g.radial_per_octave() + 1);
  rep.radii.assign(r.begin(), r.begin() + n);
  rep.values.assign(v.begin(), v.begin() + n);
  std::vector<double> sorted = rep.values;
  std::sort(sorted.begin(), sorted.end());
  rep.median = sorted[n / 2];
  rep.max_over_median = safe_ratio(sorted.back(), rep.median);
  rep.min_over_median = rep.median > 0.0 ? sorted.front() / rep.median : 0.0;
  rep.bounded = rep.median > 0.0 && rep.max_over_median <= 2.0 && rep.min_over_median >= 0.5;
  return rep;
}

}  // namespace layerpot
