#include "layerpot/operators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "layerpot/parallel.hpp"
#include "quadrature.hpp"

namespace layerpot {

void OperatorConfig::validate() const {
  if (!(pv_epsilon_factor > 0.0)) throw std::invalid_argument("pv_epsilon_factor must be positive");
  if (pv_extrapolation_levels < 2) throw std::invalid_argument("pv_extrapolation_levels must be >= 2");
  if (near_singular_refinement < 1) throw std::invalid_argument("near_singular_refinement must be >= 1");
  if (!(near_radius_factor > 0.0 && near_radius_factor < 1.0))
    throw std::invalid_argument("near_radius_factor must lie in (0, 1)");
  if (!(window_flat > 0.0 && window_flat < 1.0)) throw std::invalid_argument("window_flat must lie in (0, 1)");
  if (near_angular_nodes < 4 || near_angular_nodes % 2 != 0)
    throw std::invalid_argument("near_angular_nodes must be even and >= 4");
  if (panel_order < 2 || tail_order < 2) throw std::invalid_argument("quadrature orders must be >= 2");
}

double riesz_constant(int N) { return std::tgamma(0.5 * (N + 1)) * std::pow(M_PI, -0.5 * (N + 1)); }

void OpDiagnostics::merge(const OpDiagnostics& o) {
  pv_divergent = pv_divergent || o.pv_divergent;
  pv_flagged += o.pv_flagged;
  tail_divergent = tail_divergent || o.tail_divergent;
  tail_relative = std::max(tail_relative, o.tail_relative);
}

namespace {

bool is_pv(Family f) { return f == Family::SurfacePV || f == Family::RieszPV; }
bool uses_surface(Family f) { return f == Family::SingleLayer || f == Family::SurfacePV; }
int kernel_degree(Family f) { return is_pv(f) ? 2 : 1; }  // N = 2
int family_index(Family f) { return static_cast<int>(f); }

struct Box {
  int j0 = 0, nj = 0, a0 = 0, na = 0;
  std::size_t size() const { return static_cast<std::size_t>(nj) * na; }
};

// Smallest box of grid nodes touched by six-point stencils of points within
// distance `radius` of x.
Box stencil_box(const AnnularGrid& g, double rho, double theta, double radius) {
  const int nr = g.n_radial(), na = g.n_angular();
  const double lo = std::log(g.r_min()), hi = std::log(g.r_max());
  auto jstart = [&](double r) {
    const double lr = std::clamp(std::log(r), lo, hi);
    const int j = static_cast<int>(std::floor((lr - lo) / g.h() - 0.5)) - 2;
    return std::clamp(j, 0, nr - 6);
  };
  Box b;
  b.j0 = jstart(std::max(rho - radius, g.r_min()));
  const int j1 = jstart(rho + radius) + 5;
  b.nj = j1 - b.j0 + 1;
  const double dth = 2.0 * M_PI / na;
  if (radius >= rho) {
    b.a0 = 0;
    b.na = na;
    return b;
  }
  const double alpha = std::asin(radius / rho);
  const int a_lo = static_cast<int>(std::floor((theta - alpha) / dth)) - 2;
  const int a_hi = static_cast<int>(std::floor((theta + alpha) / dth)) + 3;
  if (a_hi - a_lo + 1 >= na) {
    b.a0 = 0;
    b.na = na;
  } else {
    b.a0 = ((a_lo % na) + na) % na;
    b.na = a_hi - a_lo + 1;
  }
  return b;
}

struct Panel {
  double a, b;
  int level;  // 0: outer panel; m >= 1: [eps/2^m, eps/2^{m-1}]
};

}  // namespace

struct OperatorEngine::NearRows {
  int ncomp = 0;
  std::vector<Box> box;
  std::vector<std::size_t> off;
  std::vector<double> coef;  // per target: [comp][box]
  // Richardson diagnostics: rows for (extrapolated - finest) and the finest panel.
  std::vector<Box> dbox;
  std::vector<std::size_t> doff;
  std::vector<double> dcoef;  // per target: [comp][2][dbox]
};

struct OperatorEngine::NodeGeom {};

OperatorEngine::OperatorEngine(GridPtr grid, LipschitzSurface surface, OperatorConfig cfg)
    : grid_(std::move(grid)), surface_(std::move(surface)), cfg_(cfg) {
  cfg_.validate();
  if (!grid_) throw std::invalid_argument("OperatorEngine needs a grid");
  if (grid_->dim() != 2 || surface_.dim() != 2)
    throw std::invalid_argument("the quadrature operators are implemented for N = 2");
  const std::size_t n = grid_->size();
  phi_.resize(n);
  omega_.resize(n);
  psi_ = ScalarField(grid_);
  grad_phi_.assign(2, ScalarField(grid_));
  for (std::size_t i = 0; i < n; ++i) {
    const Point y = grid_->node(i);
    const SurfaceValue sv = surface_eval(surface_, y);
    phi_[i] = sv.phi;
    omega_[i] = sv.omega;
    psi_[i] = psi_weight(surface_, y);
    grad_phi_[0][i] = sv.grad[0];
    grad_phi_[1][i] = sv.grad[1];
  }
}

OperatorEngine::~OperatorEngine() = default;

int OperatorEngine::components(Family f) const {
  switch (f) {
    case Family::Riesz:
    case Family::SingleLayer:
      return 1;
    case Family::SurfacePV:
      return 3;
    case Family::RieszPV:
      return 2;
  }
  return 1;
}

void OperatorEngine::kernel(Family f, const Point& x, double phix, const Point& y, double phiy, double omegay,
                            double* out) const {
  const double dx = x[0] - y[0], dy = x[1] - y[1];
  const double d2 = dx * dx + dy * dy;
  switch (f) {
    case Family::Riesz:
      out[0] = 1.0 / std::sqrt(d2);
      break;
    case Family::SingleLayer: {
      const double dp = phix - phiy;
      out[0] = omegay / std::sqrt(d2 + dp * dp);
      break;
    }
    case Family::SurfacePV: {
      const double dp = phix - phiy;
      const double D2 = d2 + dp * dp;
      const double inv = omegay / (D2 * std::sqrt(D2));
      out[0] = dx * inv;
      out[1] = dy * inv;
      out[2] = dp * inv;
      break;
    }
    case Family::RieszPV: {
      const double inv = riesz_constant(2) / (d2 * std::sqrt(d2));
      out[0] = dx * inv;
      out[1] = dy * inv;
      break;
    }
  }
}

namespace {

// Local polar quadrature around x. Calls visit(K * weight per component,
// richardson scale, d1 scale, d2 scale, stencil) for every patch point that
// lies inside the grid.
template <class KernelFn, class Visit>
void near_points(const AnnularGrid& g, const OperatorConfig& cfg, bool pv, int ncomp, const Point& x,
                 KernelFn&& kern, Visit&& visit) {
  const double rho = norm(x, 2);
  const double delta = cfg.near_radius_factor * rho;
  const double spacing = rho * std::min(g.h(), 2.0 * M_PI / g.n_angular());
  const double eps = cfg.pv_epsilon_factor * spacing;
  const int L = cfg.pv_extrapolation_levels;

  std::vector<Panel> panels;
  if (pv) {
    for (int m = L - 1; m >= 1; --m) panels.push_back({eps / std::ldexp(1.0, m), eps / std::ldexp(1.0, m - 1), m});
  } else {
    panels.push_back({0.0, eps, 0});
  }
  const int nsr = cfg.near_singular_refinement;
  for (int k = 0; k < nsr; ++k) panels.push_back({eps + (delta - eps) * k / nsr, eps + (delta - eps) * (k + 1) / nsr, 0});

  std::vector<double> scale(L, 1.0);
  if (pv) {
    const std::vector<double> c = detail::richardson_weights(L);
    for (int m = 1; m < L; ++m) {
      double s = 0.0;
      for (int l = m; l < L; ++l) s += c[l];
      scale[m] = s;
    }
  }
  const int nth = cfg.near_angular_nodes;
  const double wth = 2.0 * M_PI / nth;
  std::vector<double> cs(nth), sn(nth);
  for (int k = 0; k < nth; ++k) {
    cs[k] = std::cos(wth * (k + 0.5));
    sn[k] = std::sin(wth * (k + 0.5));
  }
  double K[3];
  detail::Stencil st;
  for (const Panel& p : panels) {
    const detail::Rule rr = detail::gauss_legendre(cfg.panel_order, p.a, p.b);
    const double s_rich = pv ? scale[p.level] : 1.0;
    const double s_d1 = (pv && p.level >= 1) ? scale[p.level] - 1.0 : 0.0;
    const double s_d2 = (pv && p.level == L - 1) ? 1.0 : 0.0;
    for (std::size_t q = 0; q < rr.x.size(); ++q) {
      const double rp = rr.x[q];
      const double wr = rr.w[q] * wth * rp * detail::window(rp / delta, cfg.window_flat);
      if (wr == 0.0) continue;
      for (int k = 0; k < nth; ++k) {
        const Point y{x[0] + rp * cs[k], x[1] + rp * sn[k], 0.0};
        const double ry = std::hypot(y[0], y[1]);
        if (!detail::stencil_at(g, std::log(ry), std::atan2(y[1], y[0]), st)) continue;
        kern(y, K);
        for (int c = 0; c < ncomp; ++c) K[c] *= wr;
        visit(K, s_rich, s_d1, s_d2, st);
      }
    }
  }
}

}  // namespace

const OperatorEngine::NearRows& OperatorEngine::near_rows(Family f) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto& slot = rows_[family_index(f)];
  if (!slot) {
    auto rows = std::make_unique<NearRows>();
    build_rows(f, *rows);
    slot = std::move(rows);
  }
  return *slot;
}

void OperatorEngine::build_rows(Family f, NearRows& rows) const {
  const AnnularGrid& g = *grid_;
  const std::size_t n = g.size();
  const int nc = components(f);
  const bool pv = is_pv(f);
  const int na = g.n_angular();
  rows.ncomp = nc;
  rows.box.resize(n);
  rows.off.resize(n + 1);
  rows.dbox.resize(n);
  rows.doff.resize(n + 1);
  rows.off[0] = rows.doff[0] = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int j = g.shell_of(i), a = g.angle_of(i);
    const double rho = g.radius(j), th = g.theta(a);
    rows.box[i] = stencil_box(g, rho, th, cfg_.near_radius_factor * rho);
    rows.off[i + 1] = rows.off[i] + nc * rows.box[i].size();
    if (pv) {
      const double eps = cfg_.pv_epsilon_factor * rho * std::min(g.h(), 2.0 * M_PI / na);
      rows.dbox[i] = stencil_box(g, rho, th, eps);
      rows.doff[i + 1] = rows.doff[i] + 2 * nc * rows.dbox[i].size();
    } else {
      rows.doff[i + 1] = rows.doff[i];
    }
  }
  rows.coef.assign(rows.off[n], 0.0);
  rows.dcoef.assign(rows.doff[n], 0.0);

  parallel_for(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Point x = g.node(i);
      const double phix = phi_[i];
      const Box& bx = rows.box[i];
      const Box& dbx = rows.dbox[i];
      double* cf = rows.coef.data() + rows.off[i];
      double* dcf = rows.dcoef.data() + rows.doff[i];
      auto kern = [&](const Point& y, double* K) {
        if (uses_surface(f) && !surface_.is_flat()) {
          const SurfaceValue sv = surface_eval(surface_, y);
          kernel(f, x, phix, y, sv.phi, sv.omega, K);
        } else {
          kernel(f, x, 0.0, y, 0.0, 1.0, K);
        }
      };
      auto visit = [&](const double* K, double s_rich, double s_d1, double s_d2, const detail::Stencil& st) {
        for (int p = 0; p < 6; ++p) {
          const int jj = st.j0 + p;
          for (int q = 0; q < 6; ++q) {
            int aa = st.a0 + q;
            if (aa >= na) aa -= na;
            const double wpq = st.ws[p] * st.wa[q];
            const int bj = jj - bx.j0;
            const int ba = ((aa - bx.a0) % na + na) % na;
            const std::size_t idx = static_cast<std::size_t>(bj) * bx.na + ba;
            for (int c = 0; c < nc; ++c) cf[c * bx.size() + idx] += s_rich * K[c] * wpq;
            if (s_d1 != 0.0 || s_d2 != 0.0) {
              const int dj = jj - dbx.j0;
              const int da = ((aa - dbx.a0) % na + na) % na;
              const std::size_t didx = static_cast<std::size_t>(dj) * dbx.na + da;
              for (int c = 0; c < nc; ++c) {
                dcf[(2 * c) * dbx.size() + didx] += s_d1 * K[c] * wpq;
                dcf[(2 * c + 1) * dbx.size() + didx] += s_d2 * K[c] * wpq;
              }
            }
          }
        }
      };
      near_points(g, cfg_, pv, nc, x, kern, visit);
    }
  });
}

std::vector<ScalarField> OperatorEngine::apply_all(Family f, const ScalarField& u, OpDiagnostics* diag) const {
  std::vector<const ScalarField*> d(components(f), &u);
  return apply(f, d, diag);
}

std::vector<ScalarField> OperatorEngine::apply(Family f, const std::vector<const ScalarField*>& dens,
                                               OpDiagnostics* diag) const {
  const AnnularGrid& g = *grid_;
  const int nc = components(f);
  if (static_cast<int>(dens.size()) != nc) throw std::invalid_argument("apply: one density per kernel component");
  for (const ScalarField* d : dens)
    if (!d || !(d->g() == g)) throw std::invalid_argument("apply: density on a different grid");
  if (f == Family::SingleLayer && surface_.is_flat()) f = Family::Riesz;

  const std::size_t n = g.size();
  std::vector<ScalarField> out(nc, ScalarField(grid_));
  bool all_zero = true;
  for (const ScalarField* d : dens) all_zero = all_zero && d->max_abs() == 0.0;
  if (all_zero) return out;
  if (f == Family::SurfacePV && surface_.is_flat()) {
    // T_{N+1} vanishes identically on a flat surface
  }

  const NearRows& rows = near_rows(f);
  std::vector<std::vector<double>> wd(nc, std::vector<double>(n));
  std::vector<double> X(n), Y(n);
  for (std::size_t m = 0; m < n; ++m) {
    const Point y = g.node(m);
    X[m] = y[0];
    Y[m] = y[1];
    for (int c = 0; c < nc; ++c) wd[c][m] = g.weight(m) * (*dens[c])[m];
  }
  const double cN = riesz_constant(2);
  const double t0 = cfg_.window_flat;
  const int na = g.n_angular();
  std::vector<double> rich_gap(n, 0.0), rich_fine(n, 0.0);
  const bool curved = uses_surface(f) && !surface_.is_flat();

  parallel_for(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const double xi = X[i], yi = Y[i];
      const double rho = g.radius(g.shell_of(i));
      const double delta = cfg_.near_radius_factor * rho, delta2 = delta * delta;
      const double phix = curved ? phi_[i] : 0.0;
      double acc[3] = {0.0, 0.0, 0.0};
      for (std::size_t m = 0; m < n; ++m) {
        const double dx = xi - X[m], dy = yi - Y[m];
        const double d2 = dx * dx + dy * dy;
        double win = 1.0;
        if (d2 < delta2) {
          win = 1.0 - detail::window(std::sqrt(d2) / delta, t0);
          if (win == 0.0) continue;
        }
        switch (f) {
          case Family::Riesz:
            acc[0] += win * wd[0][m] / std::sqrt(d2);
            break;
          case Family::SingleLayer: {
            const double dp = phix - phi_[m];
            acc[0] += win * wd[0][m] * omega_[m] / std::sqrt(d2 + dp * dp);
            break;
          }
          case Family::SurfacePV: {
            const double dp = phix - phi_[m];
            const double D2 = d2 + dp * dp;
            const double k = win * omega_[m] / (D2 * std::sqrt(D2));
            acc[0] += k * dx * wd[0][m];
            acc[1] += k * dy * wd[1][m];
            acc[2] += k * dp * wd[2][m];
            break;
          }
          case Family::RieszPV: {
            const double k = win * cN / (d2 * std::sqrt(d2));
            acc[0] += k * dx * wd[0][m];
            acc[1] += k * dy * wd[1][m];
            break;
          }
        }
      }
      const Box& bx = rows.box[i];
      const double* cf = rows.coef.data() + rows.off[i];
      for (int c = 0; c < nc; ++c) {
        const ScalarField& u = *dens[c];
        const double* row = cf + c * bx.size();
        double s = 0.0;
        for (int bj = 0; bj < bx.nj; ++bj) {
          const std::size_t base = g.index(bx.j0 + bj, 0);
          for (int ba = 0; ba < bx.na; ++ba) {
            int a = bx.a0 + ba;
            if (a >= na) a -= na;
            s += row[bj * bx.na + ba] * u[base + a];
          }
        }
        acc[c] += s;
      }
      if (is_pv(f)) {
        const Box& dbx = rows.dbox[i];
        const double* dcf = rows.dcoef.data() + rows.doff[i];
        for (int c = 0; c < nc; ++c) {
          const ScalarField& u = *dens[c];
          double d1 = 0.0, d2v = 0.0;
          for (int bj = 0; bj < dbx.nj; ++bj) {
            const std::size_t base = g.index(dbx.j0 + bj, 0);
            for (int ba = 0; ba < dbx.na; ++ba) {
              int a = dbx.a0 + ba;
              if (a >= na) a -= na;
              d1 += dcf[(2 * c) * dbx.size() + bj * dbx.na + ba] * u[base + a];
              d2v += dcf[(2 * c + 1) * dbx.size() + bj * dbx.na + ba] * u[base + a];
            }
          }
          rich_gap[i] = std::max(rich_gap[i], std::abs(d1));
          rich_fine[i] = std::max(rich_fine[i], std::abs(d2v));
        }
      }
      for (int c = 0; c < nc; ++c) out[c][i] = acc[c];
    }
  });

  OpDiagnostics local;
  if (is_pv(f)) {
    // differences at rounding level of the result are not disagreements
    double scale = 0.0;
    for (const ScalarField& o : out) scale = std::max(scale, o.max_abs());
    const double floor = 1e-9 * scale;
    for (std::size_t i = 0; i < n; ++i)
      if (rich_gap[i] > 5.0 * rich_fine[i] + floor) ++local.pv_flagged;
  }
  local.pv_divergent = local.pv_flagged > 0;
  if (cfg_.tail_correction) add_tails(f, dens, out, local);
  if (diag) diag->merge(local);
  return out;
}

namespace {

double shell_norm(const ScalarField& u, int j) {
  const AnnularGrid& g = u.g();
  double s = 0.0;
  for (int a = 0; a < g.n_angular(); ++a) s += g.angular_weight(a) * u[g.index(j, a)] * u[g.index(j, a)];
  return std::sqrt(s);
}

// Power-law model of a density beyond one end of the grid.
struct TailModel {
  bool active = false;
  bool divergent = false;
  double beta = 0.0;    // |g| ~ rho^{-beta} outside (outer) or rho^{beta} inside (inner)
  int shell = 0;
};

// The anchor shell sits one octave inside the grid edge: the edge octave
// itself is polluted by the missing exterior and is not trusted.
TailModel fit_model(const ScalarField& u, int anchor, int inner_shell, bool outer) {
  TailModel m;
  m.shell = anchor;
  const double a = shell_norm(u, anchor), b = shell_norm(u, inner_shell);
  if (a == 0.0) return m;
  if (b == 0.0) {
    m.divergent = true;
    return m;
  }
  m.beta = outer ? std::log2(b / a) : std::log2(a / b);
  m.active = true;
  return m;
}

TailModel outer_model(const ScalarField& u) {
  const AnnularGrid& g = u.g();
  const int J = g.radial_per_octave(), last = g.n_radial() - 1;
  return fit_model(u, last - J, last - 2 * J, true);
}

TailModel inner_model(const ScalarField& u) {
  const int J = u.g().radial_per_octave();
  return fit_model(u, J, 2 * J, false);
}

struct VirtualNode {
  Point y;
  double phi, omega;
  double weight;  // quadrature weight times model density
};

}  // namespace

void OperatorEngine::add_tails(Family f, const std::vector<const ScalarField*>& dens, std::vector<ScalarField>& out,
                               OpDiagnostics& diag) const {
  const AnnularGrid& g = *grid_;
  const int nc = components(f);
  const int N = 2, d = kernel_degree(f);
  const bool curved = uses_surface(f) && !surface_.is_flat();
  const std::size_t n = g.size();
  std::vector<ScalarField> tails(nc, ScalarField(grid_));

  for (int c = 0; c < nc; ++c) {
    const ScalarField& u = *dens[c];
    std::vector<VirtualNode> vn;
    auto add_side = [&](const TailModel& m, bool outer) {
      if (m.divergent) diag.tail_divergent = true;
      if (!m.active) return;
      const double kappa = outer ? m.beta + d - N : m.beta + N;
      if (!(kappa > 0.05)) {
        diag.tail_divergent = true;
        return;
      }
      const detail::Rule lr = detail::gauss_laguerre(cfg_.tail_order, kappa);
      const double rho_s = g.radius(m.shell);
      const double r_edge = outer ? g.r_max() : g.r_min();
      for (std::size_t l = 0; l < lr.x.size(); ++l) {
        const double tau = lr.x[l];
        const double rho = outer ? r_edge * std::exp(tau) : r_edge * std::exp(-tau);
        const double model = outer ? std::pow(rho / rho_s, -m.beta) : std::pow(rho / rho_s, m.beta);
        // d rho -> rho d tau; times rho^{N-1} Jacobian; undo the Laguerre weight
        const double w = lr.w[l] * std::exp(kappa * tau) * model * std::pow(rho, N);
        for (int a = 0; a < g.n_angular(); ++a) {
          const Point& dir = g.direction(a);
          VirtualNode v;
          v.y = {rho * dir[0], rho * dir[1], 0.0};
          if (curved) {
            const SurfaceValue sv = surface_eval(surface_, v.y);
            v.phi = sv.phi;
            v.omega = sv.omega;
          } else {
            v.phi = 0.0;
            v.omega = 1.0;
          }
          v.weight = w * g.angular_weight(a) * u[g.index(m.shell, a)];
          vn.push_back(v);
        }
      }
    };
    add_side(outer_model(u), true);
    add_side(inner_model(u), false);
    if (vn.empty()) continue;
    parallel_for(n, [&](std::size_t b, std::size_t e) {
      double K[3];
      for (std::size_t i = b; i < e; ++i) {
        const Point x = g.node(i);
        const double phix = curved ? phi_[i] : 0.0;
        double s = 0.0;
        for (const VirtualNode& v : vn) {
          kernel(f, x, phix, v.y, v.phi, v.omega, K);
          s += v.weight * K[c];
        }
        tails[c][i] = s;
      }
    });
  }
  for (int c = 0; c < nc; ++c) {
    const double tmax = tails[c].max_abs();
    out[c] += tails[c];
    const double omax = out[c].max_abs();
    if (omax > 0.0) diag.tail_relative = std::max(diag.tail_relative, tmax / omax);
  }
}

std::vector<double> OperatorEngine::evaluate_at(Family f, int comp, const ScalarField& u,
                                                const std::vector<Point>& xs) const {
  const AnnularGrid& g = *grid_;
  const int nc = components(f);
  if (comp < 0 || comp >= nc) throw std::invalid_argument("evaluate_at: component out of range");
  if (f == Family::SingleLayer && surface_.is_flat()) f = Family::Riesz;
  const bool curved = uses_surface(f) && !surface_.is_flat();
  const bool pv = is_pv(f);
  const std::size_t n = g.size();
  const int N = 2, d = kernel_degree(f);
  std::vector<double> res(xs.size(), 0.0);
  const TailModel mo = cfg_.tail_correction ? outer_model(u) : TailModel{};
  const TailModel mi = cfg_.tail_correction ? inner_model(u) : TailModel{};

  for (std::size_t t = 0; t < xs.size(); ++t) {
    const Point x{xs[t][0], xs[t][1], 0.0};
    const double rx = norm(x, 2);
    const double phix = curved ? surface_.phi(x) : 0.0;
    const bool inside = rx >= g.r_min() && rx <= g.r_max();
    const double delta = inside ? cfg_.near_radius_factor * rx : 0.0;
    double K[3];
    double s = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      const Point y = g.node(m);
      const double dist = distance(x, y, 2);
      double win = 1.0;
      if (dist < delta) {
        win = 1.0 - detail::window(dist / delta, cfg_.window_flat);
      }
      if (win == 0.0 || dist == 0.0) continue;
      kernel(f, x, phix, y, phi_[m], omega_[m], K);
      s += win * g.weight(m) * u[m] * K[comp];
    }
    if (inside) {
      auto kern = [&](const Point& y, double* Kk) {
        if (curved) {
          const SurfaceValue sv = surface_eval(surface_, y);
          kernel(f, x, phix, y, sv.phi, sv.omega, Kk);
        } else {
          kernel(f, x, 0.0, y, 0.0, 1.0, Kk);
        }
      };
      auto visit = [&](const double* Kw, double s_rich, double, double, const detail::Stencil& st) {
        s += s_rich * Kw[comp] * detail::interpolate(u, st);
      };
      near_points(g, cfg_, pv, nc, x, kern, visit);
    }
    // tails with the same power-law models as apply()
    for (int side = 0; side < 2; ++side) {
      const TailModel& m = side == 0 ? mo : mi;
      if (!m.active) continue;
      const bool outer = side == 0;
      double kappa = outer ? m.beta + d - N : m.beta + N - (rx < g.r_min() ? d : 0);
      if (!(kappa > 0.05)) continue;
      const detail::Rule lr = detail::gauss_laguerre(cfg_.tail_order, kappa);
      const double rho_s = g.radius(m.shell);
      const double r_edge = outer ? g.r_max() : g.r_min();
      for (std::size_t l = 0; l < lr.x.size(); ++l) {
        const double tau = lr.x[l];
        const double rho = outer ? r_edge * std::exp(tau) : r_edge * std::exp(-tau);
        const double model = outer ? std::pow(rho / rho_s, -m.beta) : std::pow(rho / rho_s, m.beta);
        const double w = lr.w[l] * std::exp(kappa * tau) * model * std::pow(rho, N);
        for (int a = 0; a < g.n_angular(); ++a) {
          const Point& dir = g.direction(a);
          const Point y{rho * dir[0], rho * dir[1], 0.0};
          double py = 0.0, oy = 1.0;
          if (curved) {
            const SurfaceValue sv = surface_eval(surface_, y);
            py = sv.phi;
            oy = sv.omega;
          }
          if (distance(x, y, 2) == 0.0) continue;
          kernel(f, x, phix, y, py, oy, K);
          s += w * g.angular_weight(a) * u[g.index(m.shell, a)] * K[comp];
        }
      }
    }
    res[t] = s;
  }
  return res;
}

// ---------------------------------------------------------------------------

ScalarField riesz_potential(const OperatorEngine& e, const ScalarField& u, bool weighted, OpDiagnostics* d) {
  if (weighted) {
    const ScalarField pu = hadamard(e.psi(), u);
    return e.apply_all(Family::Riesz, pu, d)[0];
  }
  return e.apply_all(Family::Riesz, u, d)[0];
}

ScalarField single_layer(const OperatorEngine& e, const ScalarField& u, OpDiagnostics* d) {
  return e.apply_all(Family::SingleLayer, u, d)[0];
}

VectorField single_layer_grad(const OperatorEngine& e, const ScalarField& u, OpDiagnostics* d) {
  // d_k S u = (1-N)(T_k u + d_k phi T_{N+1} u), N = 2
  const std::vector<ScalarField> t = e.apply_all(Family::SurfacePV, u, d);
  VectorField out;
  for (int k = 0; k < 2; ++k) {
    ScalarField gk = t[k] + hadamard(e.grad_phi(k), t[2]);
    gk *= -1.0;
    out.push_back(std::move(gk));
  }
  return out;
}

ScalarField riesz_transform_sum(const OperatorEngine& e, const VectorField& g, OpDiagnostics* d) {
  if (g.size() != 2) throw std::invalid_argument("riesz_transform_sum: need N = 2 components");
  const std::vector<ScalarField> r = e.apply(Family::RieszPV, {&g[0], &g[1]}, d);
  return r[0] + r[1];
}

ScalarField r_solve(const OperatorEngine& e, const ScalarField& f, const VectorField& f_grad, OpDiagnostics* d) {
  (void)f;
  ScalarField out = riesz_transform_sum(e, f_grad, d);
  out *= riesz_constant(2) / (2 - 1);
  return out;
}

VectorField diff_operator_grad(const OperatorEngine& e, const ScalarField& u, OpDiagnostics* d) {
  const std::vector<ScalarField> t = e.apply_all(Family::SurfacePV, u, d);
  const ScalarField pu = hadamard(e.psi(), u);
  const std::vector<ScalarField> r = e.apply_all(Family::RieszPV, pu, d);
  const double inv_cN = 1.0 / riesz_constant(2);
  VectorField out;
  for (int k = 0; k < 2; ++k) {
    ScalarField gk = t[k] - inv_cN * r[k] + hadamard(e.grad_phi(k), t[2]);
    out.push_back(std::move(gk));  // times (N - 1) = 1
  }
  return out;
}

ScalarField riesz_potential(const ScalarField& u, bool weighted, const LipschitzSurface& surface,
                            const OperatorConfig& cfg, OpDiagnostics* diag) {
  OperatorEngine e(u.grid(), weighted ? surface : LipschitzSurface::flat(surface.dim()), cfg);
  return riesz_potential(e, u, weighted, diag);
}

ScalarField single_layer(const ScalarField& u, const LipschitzSurface& surface, const OperatorConfig& cfg,
                         OpDiagnostics* diag) {
  OperatorEngine e(u.grid(), surface, cfg);
  return single_layer(e, u, diag);
}

ScalarField pv_transform(const ScalarField& u, PvKind kind, int k, const LipschitzSurface& surface,
                         const OperatorConfig& cfg, OpDiagnostics* diag) {
  if ((kind == PvKind::T || kind == PvKind::R || kind == PvKind::Rpsi) && (k < 0 || k >= 2))
    throw std::invalid_argument("pv_transform: axis out of range");
  switch (kind) {
    case PvKind::T: {
      OperatorEngine e(u.grid(), surface, cfg);
      return e.apply_all(Family::SurfacePV, u, diag)[k];
    }
    case PvKind::TN1: {
      if (surface.is_flat()) return ScalarField(u.grid());
      OperatorEngine e(u.grid(), surface, cfg);
      return e.apply_all(Family::SurfacePV, u, diag)[2];
    }
    case PvKind::R: {
      OperatorEngine e(u.grid(), LipschitzSurface::flat(surface.dim()), cfg);
      return e.apply_all(Family::RieszPV, u, diag)[k];
    }
    case PvKind::Rpsi: {
      OperatorEngine e(u.grid(), surface, cfg);
      return e.apply_all(Family::RieszPV, hadamard(e.psi(), u), diag)[k];
    }
  }
  return ScalarField(u.grid());
}

VectorField single_layer_grad(const ScalarField& u, const LipschitzSurface& surface, const OperatorConfig& cfg,
                              OpDiagnostics* diag) {
  OperatorEngine e(u.grid(), surface, cfg);
  return single_layer_grad(e, u, diag);
}

ScalarField r_solve(const ScalarField& f, const VectorField& f_grad, const OperatorConfig& cfg, OpDiagnostics* diag) {
  const YMembership m = y_membership(f, f_grad, 1.0);
  if (!m.member) throw std::invalid_argument("r_solve: f fails the Y membership check");
  OperatorEngine e(f.grid(), LipschitzSurface::flat(f.g().dim()), cfg);
  return r_solve(e, f, f_grad, diag);
}

}  // namespace layerpot
