#include "layerpot/grid.hpp"

#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace layerpot {

namespace {

constexpr double kLn2 = 0.69314718055994530942;

// Range checks on radii tolerate rounding in r_min 2^{k/J}.
bool within(double r, double lo, double hi) { return r >= lo * (1.0 - 1e-12) && r <= hi * (1.0 + 1e-12); }

}  // namespace

AnnularGrid::AnnularGrid(int dim, double r_min, double r_max, int J, int A)
    : dim_(dim), J_(J), A_(A), r_min_(r_min), r_max_(r_max) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("grid dimension must be 2 or 3");
  if (!(r_min > 0.0) || !(r_max > r_min)) throw std::invalid_argument("need 0 < r_min < r_max");
  if (J < 4) throw std::invalid_argument("radial_per_octave must be >= 4");
  if (A < 8) throw std::invalid_argument("angular_count must be >= 8");
  if (dim == 3 && A % 2 != 0) throw std::invalid_argument("angular_count must be even for N = 3");
  const double shells = J * std::log2(r_max / r_min);
  n_r_ = static_cast<int>(std::lround(shells));
  if (std::abs(shells - n_r_) > 1e-9 || n_r_ < 2 * J)
    throw std::invalid_argument("r_max / r_min must be 2^{k/J} with at least two octaves");
  h_ = kLn2 / J;
  radii_.resize(n_r_);
  shell_w_.resize(n_r_);
  for (int j = 0; j < n_r_; ++j) {
    radii_[j] = r_min * std::exp2((j + 0.5) / J);
    shell_w_[j] = std::pow(radii_[j], dim) * h_;
  }
  if (dim == 2) {
    for (int a = 0; a < A; ++a) {
      const double th = 2.0 * M_PI * a / A;
      dirs_.push_back({std::cos(th), std::sin(th), 0.0});
      theta_.push_back(th);
      ang_w_.push_back(2.0 * M_PI / A);
    }
  } else {
    const int np = A / 2;
    gsl_integration_glfixed_table* t = gsl_integration_glfixed_table_alloc(np);
    for (int b = 0; b < np; ++b) {
      double z = 0.0, wz = 0.0;
      gsl_integration_glfixed_point(-1.0, 1.0, b, &z, &wz, t);
      const double s = std::sqrt(1.0 - z * z);
      for (int a = 0; a < A; ++a) {
        const double th = 2.0 * M_PI * a / A;
        dirs_.push_back({s * std::cos(th), s * std::sin(th), z});
        theta_.push_back(th);
        ang_w_.push_back(wz * 2.0 * M_PI / A);
      }
    }
    gsl_integration_glfixed_table_free(t);
  }
}

double AnnularGrid::angular_total() const { return std::accumulate(ang_w_.begin(), ang_w_.end(), 0.0); }

Point AnnularGrid::node(std::size_t i) const {
  const double r = radii_[shell_of(i)];
  const Point& d = dirs_[angle_of(i)];
  return {r * d[0], r * d[1], r * d[2]};
}

std::vector<double> AnnularGrid::dyadic_radii() const {
  std::vector<double> out;
  for (int k = 0; k + J_ <= n_r_; ++k) out.push_back(r_min_ * std::exp2(double(k) / J_));
  return out;
}

std::vector<double> AnnularGrid::probe_radii() const {
  std::vector<double> out;
  const int k0 = 2 * J_;        // 4 r_min
  const int k_end = n_r_ - 3 * J_;  // 2r <= r_max / 4
  for (int k = k0 + J_ / 2; k <= k_end; k += J_) out.push_back(r_min_ * std::exp2(double(k) / J_));
  return out;
}

bool AnnularGrid::operator==(const AnnularGrid& o) const {
  return dim_ == o.dim_ && J_ == o.J_ && A_ == o.A_ && n_r_ == o.n_r_ && r_min_ == o.r_min_ && r_max_ == o.r_max_;
}

GridPtr make_grid(int dim, double r_min, double r_max, int J, int A) {
  return std::make_shared<const AnnularGrid>(dim, r_min, r_max, J, A);
}

// ---------------------------------------------------------------------------

ScalarField::ScalarField(GridPtr grid) : grid_(std::move(grid)) {
  if (!grid_) throw std::invalid_argument("ScalarField needs a grid");
  values_.assign(grid_->size(), 0.0);
}

ScalarField::ScalarField(GridPtr grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_) throw std::invalid_argument("ScalarField needs a grid");
  if (values_.size() != grid_->size()) throw std::invalid_argument("ScalarField: value count does not match grid");
  if (!all_finite()) throw std::invalid_argument("ScalarField: non-finite value");
}

ScalarField ScalarField::sample(GridPtr grid, Fn fn) {
  ScalarField f(grid);
  for (std::size_t i = 0; i < f.size(); ++i) f.values_[i] = fn(grid->node(i));
  if (!f.all_finite()) throw std::invalid_argument("ScalarField::sample: non-finite value");
  f.source_ = std::move(fn);
  return f;
}

double ScalarField::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

bool ScalarField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

static void check_same(const ScalarField& a, const ScalarField& b) {
  if (a.grid() != b.grid() && !(a.g() == b.g())) throw std::invalid_argument("fields live on different grids");
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
  check_same(*this, o);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
  source_ = nullptr;
  return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o) {
  check_same(*this, o);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
  source_ = nullptr;
  return *this;
}

ScalarField& ScalarField::operator*=(double s) {
  for (double& v : values_) v *= s;
  source_ = nullptr;
  return *this;
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double s, ScalarField a) { return a *= s; }

ScalarField hadamard(const ScalarField& a, const ScalarField& b) {
  check_same(a, b);
  ScalarField out(a.grid());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

ScalarField magnitude(const std::vector<ScalarField>& v) {
  if (v.empty()) throw std::invalid_argument("magnitude of an empty vector field");
  ScalarField out(v[0].grid());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (const auto& c : v) s += c[i] * c[i];
    out[i] = std::sqrt(s);
  }
  return out;
}

// ---------------------------------------------------------------------------

double SeminormProfile::at(double r) const {
  for (std::size_t k = 0; k < radii.size(); ++k)
    if (std::abs(radii[k] - r) <= 1e-9 * r) return values[k];
  throw std::out_of_range("radius not on the profile");
}

double SeminormProfile::sup() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, v);
  return m;
}

double seminorm(const ScalarField& u, double r, double p) {
  const AnnularGrid& g = u.g();
  if (!(r > 0.0) || !within(r, g.r_min(), g.r_max() / 2.0))
    throw std::invalid_argument("seminorm: need r_min <= r and 2r <= r_max");
  if (!(p >= 1.0)) throw std::invalid_argument("seminorm: p must be >= 1");
  double acc = 0.0;
  const int na = g.n_angular();
  for (int j = 0; j < g.n_radial(); ++j) {
    const double rho = g.radius(j);
    if (rho < r || rho >= 2.0 * r) continue;
    double shell = 0.0;
    for (int a = 0; a < na; ++a) {
      const double v = std::abs(u[g.index(j, a)]);
      if (v == 0.0) continue;
      shell += g.angular_weight(a) * (p == 2.0 ? v * v : std::pow(v, p));
    }
    acc += g.shell_weight(j) * shell;
  }
  const double mean = acc / std::pow(r, g.dim());
  return p == 2.0 ? std::sqrt(mean) : std::pow(mean, 1.0 / p);
}

SeminormProfile seminorm_profile(const ScalarField& u, const std::vector<double>& radii, double p) {
  SeminormProfile prof;
  prof.p = p;
  prof.radii = radii;
  prof.values.reserve(radii.size());
  for (double r : radii) prof.values.push_back(seminorm(u, r, p));
  return prof;
}

SeminormProfile seminorm_profile(const ScalarField& u, double p) {
  return seminorm_profile(u, u.g().dyadic_radii(), p);
}

double q_weight(double m, double n, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("q_weight requires t > 0");
  return t <= 1.0 ? std::pow(t, m) : std::pow(t, n);
}

NormValue weighted_profile_integral(const SeminormProfile& prof, double m, double n) {
  NormValue out;
  const std::size_t K = prof.radii.size();
  if (K == 0) return out;
  std::vector<double> g(K);
  for (std::size_t k = 0; k < K; ++k) g[k] = q_weight(m, n, prof.radii[k]) * prof.values[k];
  if (K == 1) return out;
  const double h = std::log(prof.radii[1] / prof.radii[0]);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < K; ++k) total += 0.5 * h * (g[k] + g[k + 1]);
  out.value = total;
  if (total <= 0.0) return out;

  // one octave of profile points at each end
  const std::size_t per_oct = std::max<std::size_t>(1, std::lround(std::log(2.0) / h));
  if (K <= per_oct) return out;
  auto octave_sum = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t k = a; k < b; ++k) s += 0.5 * h * (g[k] + g[k + 1]);
    return s;
  };
  const double last = octave_sum(K - 1 - per_oct, K - 1);
  const double first = octave_sum(0, per_oct);
  out.diverged = last > 0.01 * total || first > 0.01 * total;

  // geometric tails: g ~ exp(-beta |log rho|) continued past each end
  auto tail = [&](double g_end, double g_in) {
    if (g_end <= 0.0) return 0.0;
    if (g_in <= g_end) return std::numeric_limits<double>::infinity();
    const double beta = std::log(g_in / g_end) / (per_oct * h);
    return g_end / beta;
  };
  out.tail = tail(g[K - 1], g[K - 1 - per_oct]) + tail(g[0], g[per_oct]);
  if (!std::isfinite(out.tail)) out.diverged = true;
  return out;
}

NormValue xp_norm(const ScalarField& u, double p) {
  return weighted_profile_integral(seminorm_profile(u, p), u.g().dim(), 1.0);
}

NormValue y_norm(const VectorField& f_grad, double M, double p) {
  if (f_grad.empty()) throw std::invalid_argument("y_norm: empty gradient");
  const int n = f_grad[0].g().dim();
  if (!(M >= 0.0 && M <= n)) throw std::invalid_argument("y_norm: M must lie in [0, N]");
  return weighted_profile_integral(seminorm_profile(magnitude(f_grad), p), M, 1.0);
}

double radial_mean(const ScalarField& f, double r) {
  const AnnularGrid& g = f.g();
  if (!(r > 0.0) || !within(r, g.r_min(), g.r_max())) throw std::invalid_argument("radial_mean: r out of range");
  const double pos = (std::log(r) - std::log(g.r_min())) / g.h() - 0.5;
  const int j = std::clamp(static_cast<int>(std::lround(pos)), 0, g.n_radial() - 1);
  double s = 0.0;
  for (int a = 0; a < g.n_angular(); ++a) s += g.angular_weight(a) * f[g.index(j, a)];
  return s / g.angular_total();
}

YMembership y_membership(const ScalarField& f, const VectorField& f_grad, double M, double p) {
  YMembership m;
  m.norm = y_norm(f_grad, M, p);
  m.mean_at_rmax = radial_mean(f, f.g().r_max());
  m.peak = f.max_abs();
  m.member = !m.norm.diverged && std::abs(m.mean_at_rmax) <= 1e-2 * m.peak;
  if (m.peak == 0.0) m.member = true;
  return m;
}

VectorField gradient_fd(const ScalarField& f) {
  const AnnularGrid& g = f.g();
  if (g.dim() != 2) throw std::invalid_argument("gradient_fd supports N = 2 only");
  const int nr = g.n_radial(), na = g.n_angular();
  const double hs = g.h(), ht = 2.0 * M_PI / na;
  VectorField out{ScalarField(f.grid()), ScalarField(f.grid())};
  auto at = [&](int j, int a) { return f[g.index(j, ((a % na) + na) % na)]; };
  for (int j = 0; j < nr; ++j) {
    for (int a = 0; a < na; ++a) {
      double ds;
      if (j >= 2 && j + 2 < nr) {
        ds = (at(j - 2, a) - 8.0 * at(j - 1, a) + 8.0 * at(j + 1, a) - at(j + 2, a)) / (12.0 * hs);
      } else {
        // one-sided fourth order; mirrored (with a sign flip) at the outer end
        static const double c0[5] = {-25.0, 48.0, -36.0, 16.0, -3.0};
        static const double c1[5] = {-3.0, -10.0, 18.0, -6.0, 1.0};
        const bool inner = j < 2;
        const int b = inner ? j : nr - 1 - j;
        const double* c = b == 0 ? c0 : c1;
        ds = 0.0;
        for (int q = 0; q < 5; ++q) {
          const int jj = inner ? (j - b + q) : (j + b - q);
          ds += c[q] * at(jj, a);
        }
        ds /= (inner ? 12.0 : -12.0) * hs;
      }
      const double dt = (at(j, a - 2) - 8.0 * at(j, a - 1) + 8.0 * at(j, a + 1) - at(j, a + 2)) / (12.0 * ht);
      const double rho = g.radius(j), th = g.theta(a);
      const double dr = ds / rho;
      out[0][g.index(j, a)] = std::cos(th) * dr - std::sin(th) * dt / rho;
      out[1][g.index(j, a)] = std::sin(th) * dr + std::cos(th) * dt / rho;
    }
  }
  return out;
}

void write_field_csv(const std::string& path, const ScalarField& f) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("cannot write " + path);
  const AnnularGrid& g = f.g();
  std::fprintf(fp, "j,a,rho,theta,value\n");
  for (std::size_t i = 0; i < f.size(); ++i) {
    const int j = g.shell_of(i), a = g.angle_of(i);
    std::fprintf(fp, "%d,%d,%.17g,%.17g,%.17g\n", j, a, g.radius(j), g.theta(a), f[i]);
  }
  std::fclose(fp);
}

void write_profile_csv(const std::string& path, const SeminormProfile& prof) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("cannot write " + path);
  std::fprintf(fp, "r,value\n");
  for (std::size_t k = 0; k < prof.radii.size(); ++k) std::fprintf(fp, "%.17g,%.17g\n", prof.radii[k], prof.values[k]);
  std::fclose(fp);
}

}  // namespace layerpot
