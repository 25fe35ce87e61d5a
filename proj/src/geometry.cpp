#include "layerpot/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace layerpot {

double norm(const Point& x, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += x[i] * x[i];
  return std::sqrt(s);
}

double distance(const Point& x, const Point& y, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s);
}

namespace {

void check_dim(int dim) {
  if (dim < 2 || dim > 3) throw std::invalid_argument("surface dimension must be 2 or 3");
}

void check_eps(double eps) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw std::invalid_argument("surface amplitude must be finite and >= 0");
}

double sq_norm(const Point& x, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += x[i] * x[i];
  return s;
}

// E1(u) for u > 0.
double expint_e1(double u) { return -std::expint(-u); }

}  // namespace

LipschitzSurface::LipschitzSurface(std::string id, int dim, SurfaceKind kind, double eps)
    : id_(std::move(id)), dim_(dim), kind_(kind), eps_(eps) {
  check_dim(dim);
  check_eps(eps);
}

LipschitzSurface LipschitzSurface::flat(int dim) {
  LipschitzSurface s("flat", dim, SurfaceKind::Flat, 0.0);
  s.build_lip_table();
  return s;
}

static std::string with_eps(const char* name, double eps) {
  std::ostringstream os;
  os << name << ':' << eps;
  return os.str();
}

LipschitzSurface LipschitzSurface::tilt(double eps, int dim) {
  LipschitzSurface s(with_eps("tilt", eps), dim, SurfaceKind::Tilt, eps);
  s.build_lip_table();
  return s;
}

LipschitzSurface LipschitzSurface::cone(double eps, int dim) {
  LipschitzSurface s(with_eps("cone", eps), dim, SurfaceKind::Cone, eps);
  s.build_lip_table();
  return s;
}

LipschitzSurface LipschitzSurface::wave(double eps, int dim) {
  LipschitzSurface s(with_eps("wave", eps), dim, SurfaceKind::Wave, eps);
  s.build_lip_table();
  return s;
}

LipschitzSurface LipschitzSurface::dini(double eps, int dim) {
  LipschitzSurface s(with_eps("dini", eps), dim, SurfaceKind::Dini, eps);
  s.build_lip_table();
  return s;
}

LipschitzSurface LipschitzSurface::custom(std::string id, int dim, ScalarFn phi, GradFn grad) {
  if (!phi || !grad) throw std::invalid_argument("custom surface needs phi and grad");
  LipschitzSurface s(std::move(id), dim, SurfaceKind::Custom, 0.0);
  s.custom_phi_ = std::move(phi);
  s.custom_grad_ = std::move(grad);
  s.build_lip_table();
  return s;
}

LipschitzSurface LipschitzSurface::from_id(const std::string& id, int dim) {
  if (id == "flat") return flat(dim);
  const auto colon = id.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("unknown surface id: " + id);
  const std::string name = id.substr(0, colon);
  double eps = 0.0;
  try {
    std::size_t used = 0;
    eps = std::stod(id.substr(colon + 1), &used);
    if (used != id.size() - colon - 1) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw std::invalid_argument("bad amplitude in surface id: " + id);
  }
  if (name == "tilt") return tilt(eps, dim);
  if (name == "cone") return cone(eps, dim);
  if (name == "wave") return wave(eps, dim);
  if (name == "dini") return dini(eps, dim);
  throw std::invalid_argument("unknown surface id: " + id);
}

double LipschitzSurface::phi(const Point& x) const {
  switch (kind_) {
    case SurfaceKind::Flat:
      return 0.0;
    case SurfaceKind::Tilt:
      return eps_ * x[0];
    case SurfaceKind::Cone: {
      // eps*(sqrt(1+|x|^2) - 1), written to avoid cancellation near 0
      const double q = sq_norm(x, dim_);
      return eps_ * q / (std::sqrt(1.0 + q) + 1.0);
    }
    case SurfaceKind::Wave:
      return eps_ * std::sin(x[0]) * std::exp(-sq_norm(x, dim_) / 50.0);
    case SurfaceKind::Dini: {
      // radial profile g with g'(rho) = eps/(1 - log(rho/2)) on (0,2), eps beyond
      const double rho = norm(x, dim_);
      if (rho == 0.0) return 0.0;
      const double e = std::exp(1.0);
      if (rho <= 2.0) return 2.0 * eps_ * e * expint_e1(1.0 - std::log(rho / 2.0));
      return 2.0 * eps_ * e * expint_e1(1.0) + eps_ * (rho - 2.0);
    }
    case SurfaceKind::Custom:
      return custom_phi_(x);
  }
  return 0.0;
}

Point LipschitzSurface::grad(const Point& x) const {
  Point g{};
  switch (kind_) {
    case SurfaceKind::Flat:
      break;
    case SurfaceKind::Tilt:
      g[0] = eps_;
      break;
    case SurfaceKind::Cone: {
      const double s = eps_ / std::sqrt(1.0 + sq_norm(x, dim_));
      for (int i = 0; i < dim_; ++i) g[i] = s * x[i];
      break;
    }
    case SurfaceKind::Wave: {
      const double e = std::exp(-sq_norm(x, dim_) / 50.0);
      const double sn = std::sin(x[0]);
      g[0] = eps_ * e * (std::cos(x[0]) - sn * x[0] / 25.0);
      for (int i = 1; i < dim_; ++i) g[i] = -eps_ * e * sn * x[i] / 25.0;
      break;
    }
    case SurfaceKind::Dini: {
      const double rho = norm(x, dim_);
      if (rho == 0.0) break;
      const double slope = rho < 2.0 ? eps_ / (1.0 - std::log(rho / 2.0)) : eps_;
      for (int i = 0; i < dim_; ++i) g[i] = slope * x[i] / rho;
      break;
    }
    case SurfaceKind::Custom:
      g = custom_grad_(x);
      for (int i = dim_; i < 3; ++i) g[i] = 0.0;
      break;
  }
  return g;
}

double LipschitzSurface::closed_form_lip(double r) const {
  switch (kind_) {
    case SurfaceKind::Flat:
      return 0.0;
    case SurfaceKind::Tilt:
      return eps_;
    case SurfaceKind::Cone:
      return 2.0 * r * eps_ / std::sqrt(1.0 + 4.0 * r * r);
    case SurfaceKind::Dini:
      return r < 1.0 ? eps_ / (1.0 - std::log(r)) : eps_;
    default:
      return 0.0;
  }
}

// For a C^1 function the Lipschitz constant on a ball is sup |grad phi| over
// the ball (the ball is convex), so the table stores that supremum: sampled
// on a polar lattice, then polished by a shrinking pattern search.
void LipschitzSurface::build_lip_table() {
  constexpr int kPerOctave = 8;
  constexpr int kOctaves = 24;  // radii 2^-12 .. 2^12
  const int n = kPerOctave * kOctaves + 1;
  lip_r_.resize(n);
  lip_v_.resize(n);
  for (int i = 0; i < n; ++i) lip_r_[i] = std::ldexp(std::exp2(double(i) / kPerOctave), -12);

  if (has_closed_form()) {
    for (int i = 0; i < n; ++i) lip_v_[i] = closed_form_lip(lip_r_[i]);
    lambda0_ = kind_ == SurfaceKind::Flat ? 0.0 : eps_;
    return;
  }

  auto gnorm = [&](const Point& x) { return norm(grad(x), dim_); };
  auto clamp_ball = [&](Point x, double R) {
    const double r = norm(x, dim_);
    if (r > R) {
      for (int d = 0; d < dim_; ++d) x[d] *= R / r;
    }
    return x;
  };

  double best = gnorm(Point{});
  Point best_x{};
  double inner = 0.0;
  constexpr int kRad = 12, kAz = 96, kPol = 24;
  for (int i = 0; i < n; ++i) {
    const double R = 2.0 * lip_r_[i];
    for (int a = 0; a < kRad; ++a) {
      const double rho = inner + (R - inner) * (a + 1.0) / kRad;
      for (int b = 0; b < kAz; ++b) {
        const double th = 2.0 * M_PI * b / kAz;
        const int npol = dim_ == 3 ? kPol : 1;
        for (int c = 0; c < npol; ++c) {
          Point x{};
          if (dim_ == 2) {
            x = {rho * std::cos(th), rho * std::sin(th), 0.0};
          } else {
            const double z = -1.0 + (2.0 * c + 1.0) / npol;
            const double s = std::sqrt(1.0 - z * z);
            x = {rho * s * std::cos(th), rho * s * std::sin(th), rho * z};
          }
          const double v = gnorm(x);
          if (v > best) {
            best = v;
            best_x = x;
          }
        }
      }
    }
    // local polish around the incumbent maximiser
    double step = (R - inner) / kRad;
    while (step > 1e-9 * R) {
      bool improved = false;
      for (int d = 0; d < dim_; ++d) {
        for (double sgn : {-1.0, 1.0}) {
          Point x = best_x;
          x[d] += sgn * step;
          x = clamp_ball(x, R);
          const double v = gnorm(x);
          if (v > best) {
            best = v;
            best_x = x;
            improved = true;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    lip_v_[i] = best;  // running maximum: monotone by construction
    inner = R;
  }
  lambda0_ = lip_v_.back();
}

double LipschitzSurface::lip(double r) const {
  if (!(r > 0.0)) throw std::invalid_argument("lip_modulus requires r > 0");
  if (has_closed_form()) return std::min(closed_form_lip(r), lambda0_);
  if (r <= lip_r_.front()) return lip_v_.front();
  if (r >= lip_r_.back()) return std::min(lip_v_.back(), lambda0_);
  const double pos = (std::log2(r) + 12.0) * 8.0;
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double w = pos - double(i);
  const double v = (1.0 - w) * lip_v_[i] + w * lip_v_[std::min(i + 1, lip_v_.size() - 1)];
  return std::clamp(v, lip_v_.front(), lambda0_);
}

double lip_modulus(const LipschitzSurface& s, double r) { return s.lip(r); }

SurfaceValue surface_eval(const LipschitzSurface& s, const Point& y) {
  SurfaceValue v;
  v.phi = s.phi(y);
  v.grad = s.grad(y);
  v.omega = std::sqrt(1.0 + sq_norm(v.grad, s.dim()));
  for (int i = 0; i < s.dim(); ++i) v.Phi[i] = y[i];
  v.Phi[s.dim()] = v.phi;
  return v;
}

double psi_weight(const LipschitzSurface& s, const Point& y) {
  const int n = s.dim();
  const double r = norm(y, n);
  if (r == 0.0) throw std::invalid_argument("psi_weight requires y != 0");
  const Point g = s.grad(y);
  const double omega = std::sqrt(1.0 + sq_norm(g, n));
  const double ly = s.phi(y) / r;
  return omega * std::pow(1.0 + ly * ly, -0.5 * (n + 1));
}

Quotients l_quotients(const LipschitzSurface& s, const Point& x, const Point& y) {
  const int n = s.dim();
  const double rx = norm(x, n), ry = norm(y, n), dxy = distance(x, y, n);
  if (rx == 0.0 || ry == 0.0) throw std::invalid_argument("l_quotients requires x, y != 0");
  if (dxy == 0.0) throw std::invalid_argument("l_quotients requires x != y");
  const double px = s.phi(x), py = s.phi(y);
  return {px / rx, py / ry, (px - py) / dxy};
}

double a_value(const Quotients& q) { return (q.lxy * q.lxy - q.ly * q.ly) / (1.0 + q.ly * q.ly); }

double diff_kernel(const LipschitzSurface& s, const Point& x, const Point& y) {
  const int n = s.dim();
  const double dxy = distance(x, y, n);
  if (dxy == 0.0) throw std::invalid_argument("diff_kernel requires x != y");
  if (norm(y, n) == 0.0) throw std::invalid_argument("diff_kernel requires y != 0");
  if (s.is_flat()) return 0.0;
  const Quotients q = l_quotients(s, x, y);
  const double psi = psi_weight(s, y);
  // G = psi|x-y|^{1-N} (1 - (1+L_y^2)^{(N+1)/2} (1+L_xy^2)^{-(N-1)/2})
  const double e = 0.5 * (n + 1) * std::log1p(q.ly * q.ly) - 0.5 * (n - 1) * std::log1p(q.lxy * q.lxy);
  return -psi * std::expm1(e) * std::pow(dxy, 1 - n);
}

double diff_kernel_grad(const LipschitzSurface& s, const Point& x, const Point& y, int k) {
  const int n = s.dim();
  if (k < 0 || k >= n) throw std::invalid_argument("diff_kernel_grad: axis out of range");
  const double dxy = distance(x, y, n);
  if (dxy == 0.0 || norm(x, n) == 0.0 || norm(y, n) == 0.0)
    throw std::invalid_argument("diff_kernel_grad requires x != y and x, y != 0");
  if (s.is_flat()) return 0.0;
  const Quotients q = l_quotients(s, x, y);
  const double a = a_value(q);
  if (1.0 + a <= 1e-12) throw DegenerateConfiguration("diff_kernel_grad: 1 + a(x,y) <= 1e-12");
  const double psi = psi_weight(s, y);
  const double dk = x[k] - y[k];
  const double gk = s.grad(x)[k];
  const double dphi = s.phi(x) - s.phi(y);
  const double fac = std::pow(1.0 + a, -0.5 * (n + 1));
  // (N-1) overall sign: differentiating -omega|Phi(x)-Phi(y)|^{1-N} gives +(N-1)(...)
  const double bracket = (dk + gk * dphi) * fac - dk;
  return (n - 1) * psi * bracket / std::pow(dxy, n + 1);
}

KernelSample kernel_sample(const LipschitzSurface& s, const Point& x, const Point& y) {
  KernelSample k;
  k.x = x;
  k.y = y;
  const Quotients q = l_quotients(s, x, y);
  k.lx = q.lx;
  k.ly = q.ly;
  k.lxy = q.lxy;
  k.a_value = a_value(q);
  k.g_value = diff_kernel(s, x, y);
  for (int i = 0; i < s.dim(); ++i) k.g_grad[i] = diff_kernel_grad(s, x, y, i);
  return k;
}

const BoundLine& BoundReport::line(const std::string& name) const {
  for (const auto& l : lines)
    if (l.name == name) return l;
  throw std::out_of_range("no bound line named " + name);
}

namespace {

struct RatioAcc {
  BoundLine line;
  void add(double lhs, double rhs) {
    ++line.points;
    double r;
    if (lhs == 0.0) {
      r = 0.0;
    } else if (rhs == 0.0) {
      r = std::numeric_limits<double>::infinity();
    } else {
      r = lhs / rhs;
    }
    if (!std::isfinite(r)) line.finite = false;
    line.max_ratio = std::max(line.max_ratio, r);
  }
};

Point random_direction(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  Point d{};
  double r = 0.0;
  do {
    for (int i = 0; i < dim; ++i) d[i] = g(rng);
    r = norm(d, dim);
  } while (r < 1e-12);
  for (int i = 0; i < dim; ++i) d[i] /= r;
  return d;
}

}  // namespace

BoundReport verify_kernel_bounds(const LipschitzSurface& s, int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("verify_kernel_bounds: n_samples >= 1");
  const int n = s.dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-6.0, 6.0);

  RatioAcc x_dom{{"quotients_x_gt_2y", 0, 0.0, true}};       // 16 Lambda(|x|/2)^2
  RatioAcc x_notdom{{"quotients_x_lt_2y", 0, 0.0, true}};    // Lambda(|x|/2)^2
  RatioAcc y_dom{{"quotients_y_gt_2x", 0, 0.0, true}};       // Lambda(|y|)^2 |x|/|y|
  RatioAcc y_notdom{{"quotients_y_lt_2x", 0, 0.0, true}};    // 6 Lambda(|y|/2)^2 |x|/|y|
  RatioAcc g_full{{"g_bound", 0, 0.0, true}};                // psi (L_xy^2 + L_y^2) |x-y|^{1-N}
  RatioAcc g_lxy{{"g_bound_lxy_only", 0, 0.0, true}};        // psi L_xy^2 |x-y|^{1-N}
  RatioAcc g_scaled{{"g_scaled", 0, 0.0, true}};             // psi |x-y|^{1-N}
  RatioAcc grad{{"grad_g_bound", 0, 0.0, true}};             // psi |x-y|^{-N}(|L_xy^2-L_y^2| + Lambda(|x|/2)|L_xy|)

  BoundReport rep;
  for (int i = 0; i < n_samples; ++i) {
    const double ry = std::exp2(unif(rng));
    const double rx = ry * std::exp2(unif(rng));
    const Point dx = random_direction(rng, n), dy = random_direction(rng, n);
    Point x{}, y{};
    for (int d = 0; d < n; ++d) {
      x[d] = rx * dx[d];
      y[d] = ry * dy[d];
    }
    const double dxy = distance(x, y, n);
    if (dxy < 1e-9 * std::max(rx, ry)) {
      ++rep.skipped;
      continue;
    }
    KernelSample ks;
    try {
      ks = kernel_sample(s, x, y);
    } catch (const DegenerateConfiguration&) {
      ++rep.skipped;
      continue;
    }
    const double lhs_q = std::abs(ks.lxy * ks.lxy - ks.ly * ks.ly);
    const double lam_x2 = s.lip(rx / 2.0), lam_y2 = s.lip(ry / 2.0), lam_y = s.lip(ry);
    if (rx > 2.0 * ry) x_dom.add(lhs_q, 16.0 * lam_x2 * lam_x2);
    if (rx < 2.0 * ry) x_notdom.add(lhs_q, lam_x2 * lam_x2);
    if (ry > 2.0 * rx) y_dom.add(lhs_q, lam_y * lam_y * rx / ry);
    if (ry < 2.0 * rx) y_notdom.add(lhs_q, 6.0 * lam_y2 * lam_y2 * rx / ry);

    const double psi = psi_weight(s, y);
    const double base = psi * std::pow(dxy, 1 - n);
    const double absg = std::abs(ks.g_value);
    g_full.add(absg, base * (ks.lxy * ks.lxy + ks.ly * ks.ly));
    g_lxy.add(absg, base * ks.lxy * ks.lxy);
    g_scaled.add(absg, base);
    double gmax = 0.0;
    for (int d = 0; d < n; ++d) gmax = std::max(gmax, std::abs(ks.g_grad[d]));
    grad.add(gmax, psi * std::pow(dxy, -n) * (lhs_q + lam_x2 * std::abs(ks.lxy)));
  }
  for (auto* acc : {&x_dom, &x_notdom, &y_dom, &y_notdom, &g_full, &g_lxy, &g_scaled, &grad})
    rep.lines.push_back(acc->line);
  return rep;
}

}  // namespace layerpot
