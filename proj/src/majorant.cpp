#include "layerpot/majorant.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

namespace layerpot {

double LogProfile::at(double tt) const {
  const std::size_t n = t.size();
  if (n == 0 || tt < t.front() || tt > t.back()) return 0.0;
  if (n == 1) return values[0];
  const double pos = (tt - t.front()) / step();
  const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(pos), n - 2);
  const double f = pos - i;
  return (1.0 - f) * values[i] + f * values[i + 1];
}

LogProfile make_t_grid(const AnnularGrid& g) {
  LogProfile p;
  const int n = g.n_radial();
  const double t0 = -std::log(g.r_max());
  for (int k = 0; k <= n; ++k) p.t.push_back(t0 + k * g.h());
  p.values.assign(p.t.size(), 0.0);
  return p;
}

LogProfile to_log_profile(const SeminormProfile& prof, const AnnularGrid& g) {
  LogProfile p = make_t_grid(g);
  const int J = g.radial_per_octave();
  const std::size_t K = prof.radii.size();
  if (K == 0) return p;
  // prof.radii ascend from r_min; t index of r = r_min 2^{k/J} is n - k.
  const int n = g.n_radial();
  for (std::size_t k = 0; k < K; ++k) {
    const int idx = n - static_cast<int>(std::lround(std::log2(prof.radii[k] / g.r_min()) * J));
    if (idx >= 0 && idx <= n) p.values[idx] = prof.values[k];
  }
  const int top = n - static_cast<int>(std::lround(std::log2(prof.radii.back() / g.r_min()) * J));
  const double last = prof.values.back();
  const double prev = K > static_cast<std::size_t>(J) ? prof.values[K - 1 - J] : 0.0;
  for (int idx = top - 1; idx >= 0; --idx) {
    const int m = top - idx;
    p.values[idx] = (last > 0.0 && prev > 0.0) ? last * std::pow(last / prev, double(m) / J) : 0.0;
  }
  return p;
}

void write_log_profile_csv(const std::string& path, const LogProfile& p) {
  FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write " + path);
  std::fprintf(f, "t,r,value\n");
  for (std::size_t i = 0; i < p.size(); ++i) std::fprintf(f, "%.17g,%.17g,%.17g\n", p.t[i], std::exp(-p.t[i]), p.values[i]);
  std::fclose(f);
}

LambdaFn lambda_of_surface(const LipschitzSurface& s) {
  return [s](double nu) { return s.lip(std::exp(-nu)); };
}

LambdaFn constant_lambda(double lambda0) {
  return [lambda0](double) { return lambda0; };
}

// Cumulative trapezoid integral of lambda on a fixed table, extended by
// constants beyond it. Differences of the primitive make D multiplicative.
class LambdaIntegral {
 public:
  explicit LambdaIntegral(const LambdaFn& fn) : h_(std::log(2.0) / 8.0) {
    const int n = static_cast<int>(std::ceil(2.0 * kRange / h_)) + 1;
    lo_ = -kRange;
    lam_.resize(n);
    cum_.resize(n);
    for (int k = 0; k < n; ++k) lam_[k] = fn(lo_ + k * h_);
    cum_[0] = 0.0;
    for (int k = 1; k < n; ++k) cum_[k] = cum_[k - 1] + 0.5 * h_ * (lam_[k - 1] + lam_[k]);
  }
  double primitive(double x) const {
    const int n = static_cast<int>(lam_.size());
    const double hi = lo_ + (n - 1) * h_;
    if (x <= lo_) return lam_.front() * (x - lo_);
    if (x >= hi) return cum_.back() + lam_.back() * (x - hi);
    const int k = std::min(static_cast<int>((x - lo_) / h_), n - 2);
    const double d = x - (lo_ + k * h_);
    return cum_[k] + lam_[k] * d + (lam_[k + 1] - lam_[k]) * d * d / (2.0 * h_);
  }

 private:
  static constexpr double kRange = 120.0;
  double h_, lo_;
  std::vector<double> lam_, cum_;
};

double MajorantSpec::int_lambda(double a, double b) const {
  if (!integral) throw std::logic_error("MajorantSpec::int_lambda before finalize()");
  return integral->primitive(b) - integral->primitive(a);
}

double MajorantSpec::krav_lhs() const {
  const double Mw = N - c2 * lambda_star;
  const double q = 3.0 * lambda_star / Mw + 1.0 / c1 + 1.0 / c2;
  return C_K * (2.0 * q * q + 1.0 / c3);
}

void MajorantSpec::finalize() {
  if (!lambda_of) lambda_of = constant_lambda(lambda0);
  M = N - c2 * lambda0;
  integral = std::make_shared<LambdaIntegral>(lambda_of);
}

MajorantSpec choose_constants(int N, double lambda0, double C_K_estimate, double lambda_star, LambdaFn lambda_of) {
  if (!(C_K_estimate > 0.0)) throw std::invalid_argument("choose_constants: C_K must be positive");
  if (!(lambda_star > 0.0)) throw std::invalid_argument("choose_constants: lambda_star must be positive");
  if (lambda0 < 0.0) throw std::invalid_argument("choose_constants: lambda0 must be nonnegative");
  if (lambda0 > lambda_star) throw InadmissibleLambda("lambda0 exceeds admissible threshold");
  MajorantSpec spec;
  spec.N = N;
  spec.lambda0 = lambda0;
  spec.lambda_star = lambda_star;
  spec.C_K = C_K_estimate;
  spec.lambda_of = std::move(lambda_of);
  const double target = 0.95;
  for (int k = -12; k <= 12; ++k) {
    const double c = 10.0 * std::ldexp(1.0, k);
    if (c * lambda_star > 0.5 || c * lambda_star > 0.5 * (N - 1) || !(c < N / (2.0 * lambda_star))) break;
    spec.c1 = spec.c2 = c;
    const double Mw = N - c * lambda_star;
    const double q = 3.0 * lambda_star / Mw + 2.0 / c;
    const double rest = target / C_K_estimate - 2.0 * q * q;
    if (rest <= 0.0) continue;
    // smallest c3 = 10 2^m with 1/c3 <= rest
    int m = -12;
    while (1.0 / (10.0 * std::ldexp(1.0, m)) > rest) ++m;
    spec.c3 = 10.0 * std::ldexp(1.0, m);
    spec.finalize();
    return spec;
  }
  throw InfeasibleConstants("no constants satisfy the constant inequality for C_K = " + std::to_string(C_K_estimate));
}

double sigma_kernel(const MajorantSpec& spec, Kernel which, double a, double b) {
  switch (which) {
    case Kernel::SigmaPlus:
      return a <= b ? std::exp(spec.c1 * spec.int_lambda(a, b)) : std::exp(spec.M * (b - a));
    case Kernel::SigmaMinus:
      return a <= b ? std::exp(-spec.c1 * spec.int_lambda(a, b)) : std::exp(-spec.M * (b - a));
    case Kernel::E: {
      const double lt = spec.lambda(a);
      if (a < b) return lt * lt * std::exp(spec.N * (a - b));
      return lt * (lt * std::exp(b - a) + spec.lambda(b));
    }
    case Kernel::D:
      return std::exp(spec.c1 * spec.int_lambda(a, b));
  }
  return 0.0;
}

std::pair<double, double> e_branches_at_diagonal(const MajorantSpec& spec, double tau) {
  const double l = spec.lambda(tau);
  return {l * l, l * (l + l)};
}

double e3(const MajorantSpec& spec, double t, double tau, double sigma) {
  const double q = tau >= t ? std::exp(spec.N * (t - tau)) : 1.0;
  return q * sigma_kernel(spec, Kernel::E, tau, sigma);
}

namespace {

// Trapezoid weights of the sub-grid [i0, i1] of a uniform grid with step h.
inline double tw(std::size_t j, std::size_t i0, std::size_t i1, double h) {
  if (i0 == i1) return 0.0;
  return (j == i0 || j == i1) ? 0.5 * h : h;
}

// G(tau_i) = int E(tau_i, sigma) zeta(sigma) dsigma, split at sigma = tau_i.
std::vector<double> inner_e(const MajorantSpec& spec, const LogProfile& z) {
  const std::size_t n = z.size();
  const double h = z.step();
  std::vector<double> lam(n), G(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) lam[i] = spec.lambda(z.t[i]);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = i; j < n; ++j) s += tw(j, i, n - 1, h) * lam[i] * lam[i] * std::exp(spec.N * (z.t[i] - z.t[j])) * z.values[j];
    for (std::size_t j = 0; j <= i; ++j)
      s += tw(j, 0, i, h) * lam[i] * (lam[i] * std::exp(z.t[j] - z.t[i]) + lam[j]) * z.values[j];
    G[i] = s;
  }
  return G;
}

double q_n0(int N, double t, double tau) { return tau >= t ? std::exp(N * (t - tau)) : 1.0; }

int octave_points(const LogProfile& z) {
  return std::max(1, static_cast<int>(std::lround(std::log(2.0) / z.step())));
}

}  // namespace

LogProfile e_transform(const MajorantSpec& spec, const LogProfile& zeta) {
  LogProfile out = zeta;
  out.values = inner_e(spec, zeta);
  return out;
}

LogProfile q_transform(const MajorantSpec& spec, const LogProfile& zeta) {
  LogProfile out = zeta;
  const std::size_t n = zeta.size();
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += tw(i, 0, n - 1, zeta.step()) * q_n0(spec.N, zeta.t[k], zeta.t[i]) * zeta.values[i];
    out.values[k] = s;
  }
  return out;
}

ProfileResult kk_apply(const MajorantSpec& spec, const LogProfile& zeta) {
  ProfileResult res;
  res.profile = zeta;
  const std::size_t n = zeta.size();
  if (n < 2) throw std::invalid_argument("kk_apply: profile needs >= 2 points");
  const double h = zeta.step();
  const std::vector<double> G = inner_e(spec, zeta);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += tw(i, 0, n - 1, h) * q_n0(spec.N, zeta.t[k], zeta.t[i]) * G[i];
    res.profile.values[k] = spec.C_K * s;
  }
  bool div = false;
  domain_integral(spec, zeta, &div);
  res.diverged = div;
  return res;
}

double domain_integral(const MajorantSpec& spec, const LogProfile& zeta, bool* diverged) {
  const std::size_t n = zeta.size();
  const double h = zeta.step();
  const int oct = octave_points(zeta);
  const std::vector<double> lam = [&] {
    std::vector<double> l(n);
    for (std::size_t i = 0; i < n; ++i) l[i] = spec.lambda(zeta.t[i]);
    return l;
  }();
  double total = 0.0, edge = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double qi = tw(i, 0, n - 1, h) * q_n0(spec.N, 0.0, zeta.t[i]);
    for (std::size_t j = 0; j < n; ++j) {
      double e, w;
      if (j >= i) {
        e = lam[i] * lam[i] * std::exp(spec.N * (zeta.t[i] - zeta.t[j]));
        w = tw(j, i, n - 1, h);
      } else {
        e = 0.0;
        w = 0.0;
      }
      double c = w * e * std::abs(zeta.values[j]);
      if (j <= i) c += tw(j, 0, i, h) * lam[i] * (lam[i] * std::exp(zeta.t[j] - zeta.t[i]) + lam[j]) * std::abs(zeta.values[j]);
      c *= qi;
      total += c;
      const bool at_edge = static_cast<int>(i) < oct || static_cast<int>(j) < oct ||
                           static_cast<int>(i) >= static_cast<int>(n) - oct || static_cast<int>(j) >= static_cast<int>(n) - oct;
      if (at_edge) edge += c;
    }
  }
  if (diverged) *diverged = total > 0.0 && edge > 0.01 * total;
  return total;
}

namespace {

// v(t) on arbitrary t, trapezoid over the profile nodes plus the split point.
double v_at(const MajorantSpec& spec, const LogProfile& z, double t, double* first = nullptr, double* second = nullptr) {
  const std::size_t n = z.size();
  const double h = z.step();
  double a = 0.0, b = 0.0;
  // nodes and split
  std::vector<double> s1, w1, s2, w2;
  auto add_piece = [&](double lo, double hi, double zlo, double zhi, bool left) {
    if (hi <= lo) return;
    const double wlo = left ? std::exp(spec.c1 * spec.int_lambda(lo, t)) : std::exp(spec.M * (t - lo));
    const double whi = left ? std::exp(spec.c1 * spec.int_lambda(hi, t)) : std::exp(spec.M * (t - hi));
    (left ? a : b) += 0.5 * (hi - lo) * (wlo * zlo + whi * zhi);
  };
  const double zt = z.at(t);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double lo = z.t[i], hi = z.t[i + 1];
    if (hi <= t) {
      add_piece(lo, hi, z.values[i], z.values[i + 1], true);
    } else if (lo >= t) {
      add_piece(lo, hi, z.values[i], z.values[i + 1], false);
    } else {
      add_piece(lo, t, z.values[i], zt, true);
      add_piece(t, hi, zt, z.values[i + 1], false);
    }
  }
  (void)h;
  if (first) *first = a;
  if (second) *second = b;
  return spec.c3 * (a + b);
}

}  // namespace

ProfileResult majorant_v(const MajorantSpec& spec, const LogProfile& zeta) {
  ProfileResult res;
  res.profile = zeta;
  for (std::size_t k = 0; k < zeta.size(); ++k) res.profile.values[k] = v_at(spec, zeta, zeta.t[k]);
  // the defining integrals at t = 0, by end octave
  const int oct = octave_points(zeta);
  const std::size_t n = zeta.size();
  if (n > static_cast<std::size_t>(2 * oct)) {
    double lo_part = 0.0, hi_part = 0.0, total = 0.0;
    const double h = zeta.step();
    for (std::size_t i = 0; i < n; ++i) {
      const double s = zeta.t[i];
      const double w = s <= 0.0 ? std::exp(spec.c1 * spec.int_lambda(s, 0.0)) : std::exp(-spec.M * s);
      const double c = tw(i, 0, n - 1, h) * w * std::abs(zeta.values[i]);
      total += c;
      if (static_cast<int>(i) < oct) lo_part += c;
      if (static_cast<int>(i) >= static_cast<int>(n) - oct) hi_part += c;
    }
    res.tail_share = total > 0.0 ? std::max(lo_part, hi_part) / total : 0.0;
    res.diverged = res.tail_share > 0.01;
  }
  return res;
}

SigmaResult minimal_sigma(const MajorantSpec& spec, const LogProfile& kz, int max_iter, double tol) {
  for (double v : kz.values)
    if (v < 0.0) throw std::invalid_argument("minimal_sigma: kz must be nonnegative");
  SigmaResult res;
  res.sigma = kz;
  std::fill(res.sigma.values.begin(), res.sigma.values.end(), 0.0);
  for (int it = 1; it <= max_iter; ++it) {
    LogProfile next = kk_apply(spec, res.sigma).profile;
    double change = 0.0, sup = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
      next.values[i] += kz.values[i];
      if (next.values[i] < res.sigma.values[i]) res.monotone = false;
      change = std::max(change, std::abs(next.values[i] - res.sigma.values[i]));
      sup = std::max(sup, next.values[i]);
    }
    res.sigma = std::move(next);
    res.iterations = it;
    if (!res.monotone) throw std::runtime_error("minimal_sigma: iterates are not monotone");
    if (change <= tol * (1.0 + sup)) return res;
  }
  throw std::runtime_error("minimal_sigma: no convergence; the constant-inequality margin is too small");
}

double bound_global(const MajorantSpec& spec, const LogProfile& grad_seminorms, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("bound_global: r > 0");
  const double t = -std::log(r);
  if (grad_seminorms.size() < 2 || t < grad_seminorms.t.front() - 1e-12 || t > grad_seminorms.t.back() + 1e-12)
    throw std::invalid_argument("bound_global: r outside the profile range");
  return v_at(spec, grad_seminorms, t);
}

namespace {

// int_a^b w(s) z(s) ds with the trapezoid rule on the nodes of z inside
// [a, b] plus the two (interpolated) endpoints.
template <class W>
double trapezoid_between(const LogProfile& z, double a, double b, W&& w) {
  if (b <= a) return 0.0;
  std::vector<double> s{a};
  for (double t : z.t)
    if (t > a && t < b) s.push_back(t);
  s.push_back(b);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i)
    acc += 0.5 * (s[i + 1] - s[i]) * (w(s[i]) * z.at(s[i]) + w(s[i + 1]) * z.at(s[i + 1]));
  return acc;
}

}  // namespace

LocalBound bound_local(const MajorantSpec& spec, const LogProfile& grad_seminorms, double u_xp_norm,
                     const LogProfile& f_seminorms, double r, double r0) {
  if (!(r > 0.0 && r < r0)) throw std::invalid_argument("bound_local: need 0 < r < r0");
  const double t = -std::log(r), t0 = -std::log(r0);
  LocalBound b;
  // rho < r  <=>  s > t
  b.near = trapezoid_between(grad_seminorms, t, grad_seminorms.t.back(),
                             [&](double s) { return std::exp(spec.M * (t - s)); });
  b.middle = trapezoid_between(grad_seminorms, -std::log(2.0 * r0), t,
                               [&](double s) { return std::exp(spec.c1 * spec.int_lambda(s, t)); });
  const double fmid = trapezoid_between(f_seminorms, -std::log(2.0 * r0), -std::log(0.5 * r0), [](double) { return 1.0; });
  b.local = (u_xp_norm + fmid) * std::exp(spec.c1 * spec.int_lambda(t0, t));
  return b;
}

// ---------------------------------------------------------------------------

bool CheckReport::pass() const {
  for (const auto& l : lines)
    if (!l.pass) return false;
  return true;
}

const CheckLine& CheckReport::line(const std::string& name) const {
  for (const auto& l : lines)
    if (l.name == name) return l;
  throw std::out_of_range("no check line " + name);
}

std::string CheckReport::text() const {
  std::ostringstream o;
  o.precision(6);
  for (const auto& l : lines)
    o << l.name << " points=" << l.points << " max_ratio=" << l.max_ratio << " margin=" << l.margin()
      << (l.pass ? " PASS" : " FAIL") << "\n";
  for (const auto& s : stats) o << s.first << " = " << s.second << "\n";
  return o.str();
}

namespace {

void finish_line(CheckLine& l) { l.pass = std::isfinite(l.max_ratio) && l.max_ratio <= 1.0 + l.slack; }

double ratio(double lhs, double rhs) {
  if (lhs <= 0.0) return 0.0;
  if (rhs <= 0.0) return std::numeric_limits<double>::infinity();
  return lhs / rhs;
}

// Fine-grid double Riemann sum of int int Q_{N,0}(e^{t-tau}) E(tau,sigma) W(sigma)
// dsigma dtau, where W(sigma) = Sigma^+(s, sigma) (plus) or Sigma^-(sigma, s)
// (minus). Returned at the requested t values (all on the fine grid).
class CompositionSum {
 public:
  CompositionSum(const MajorantSpec& spec, double s, bool plus, double lo, double hi, double h)
      : spec_(spec), h_(h), lo_(lo) {
    const std::size_t n = static_cast<std::size_t>(std::ceil((hi - lo) / h)) + 1;
    x_.resize(n);
    lam_.resize(n);
    W_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      x_[i] = lo + i * h;
      lam_[i] = spec.lambda(x_[i]);
      W_[i] = plus ? sigma_kernel(spec, Kernel::SigmaPlus, s, x_[i]) : sigma_kernel(spec, Kernel::SigmaMinus, x_[i], s);
    }
    const int N = spec.N;
    // A_i = int_{x_i}^{hi} e^{N(x_i - sigma)} W ;  B_i = int_{lo}^{x_i} e^{sigma - x_i} W ;  C_i = int_{lo}^{x_i} lambda W
    std::vector<double> A(n, 0.0), B(n, 0.0), C(n, 0.0);
    const double eN = std::exp(-N * h), e1 = std::exp(-h);
    for (std::size_t i = n - 1; i-- > 0;) A[i] = eN * A[i + 1] + 0.5 * h * (W_[i] + eN * W_[i + 1]);
    for (std::size_t i = 1; i < n; ++i) {
      B[i] = e1 * B[i - 1] + 0.5 * h * (e1 * W_[i - 1] + W_[i]);
      C[i] = C[i - 1] + 0.5 * h * (lam_[i - 1] * W_[i - 1] + lam_[i] * W_[i]);
    }
    H_.resize(n);
    for (std::size_t i = 0; i < n; ++i) H_[i] = lam_[i] * lam_[i] * A[i] + lam_[i] * (lam_[i] * B[i] + C[i]);
    // outer: P_k = int_{lo}^{x_k} H ;  Q_k = int_{x_k}^{hi} e^{N(x_k - tau)} H
    P_.assign(n, 0.0);
    Q_.assign(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) P_[i] = P_[i - 1] + 0.5 * h * (H_[i - 1] + H_[i]);
    for (std::size_t i = n - 1; i-- > 0;) Q_[i] = eN * Q_[i + 1] + 0.5 * h * (H_[i] + eN * H_[i + 1]);
  }
  double lhs(double t) const {
    const std::size_t k = static_cast<std::size_t>(std::lround((t - lo_) / h_));
    return P_[k] + Q_[k];
  }

 private:
  const MajorantSpec& spec_;
  double h_, lo_;
  std::vector<double> x_, lam_, W_, H_, P_, Q_;
};

}  // namespace

CheckReport verify_kernel_composition(const MajorantSpec& spec, int n_pairs, std::uint64_t seed) {
  CheckReport rep;
  const double q = 3.0 * spec.lambda0 / spec.M + 1.0 / spec.c1 + 1.0 / spec.c2;
  const double c = 2.0 * q * q;
  rep.stats.push_back({"c", c});
  CheckLine plus{"composition_plus", 0, 0.0, 0.02, true};
  CheckLine minus{"composition_minus", 0, 0.0, 0.02, true};
  std::mt19937_64 rng(seed);
  const double hg = std::log(2.0) / 8.0;
  std::uniform_int_distribution<int> idx(-64, 64);  // the default t-grid
  // decay rates of the integrands fix how far the fine grid must reach
  const double rate = std::max(1e-3, std::min({spec.c1 * spec.lambda0, spec.N - spec.M, spec.M, 1.0}));
  const double reach = std::min(400.0, 30.0 / rate);
  const double hf = 0.01;
  for (int p = 0; p < n_pairs; ++p) {
    const double s = idx(rng) * hg, t = idx(rng) * hg;
    // grid aligned so that s and t are nodes
    const double lo = std::floor((std::min(s, t) - reach) / hf) * hf;
    const double hi = std::ceil((std::max(s, t) + reach) / hf) * hf;
    if (spec.lambda0 == 0.0) {
      ++plus.points;
      ++minus.points;
      continue;  // E vanishes identically
    }
    const CompositionSum bp(spec, s, true, lo, hi, hf);
    plus.max_ratio = std::max(plus.max_ratio, ratio(bp.lhs(t), c * sigma_kernel(spec, Kernel::SigmaPlus, s, t)));
    ++plus.points;
    const CompositionSum bm(spec, s, false, lo, hi, hf);
    minus.max_ratio = std::max(minus.max_ratio, ratio(bm.lhs(t), c * sigma_kernel(spec, Kernel::SigmaMinus, t, s)));
    ++minus.points;
  }
  finish_line(plus);
  finish_line(minus);
  rep.lines = {plus, minus};
  return rep;
}

CheckReport verify_supersolution(const MajorantSpec& spec, const LogProfile& zeta, const LogProfile& kz) {
  if (zeta.size() != kz.size()) throw std::invalid_argument("verify_supersolution: profiles on different grids");
  CheckReport rep;
  const LogProfile v = majorant_v(spec, zeta).profile;
  const LogProfile kv = kk_apply(spec, v).profile;
  CheckLine lv{"supersolution_v", 0, 0.0, 0.02, true};
  CheckLine lz{"supersolution_z", 0, 0.0, 0.02, true};
  for (std::size_t i = 0; i < v.size(); ++i) {
    lv.max_ratio = std::max(lv.max_ratio, ratio(kv.values[i] + kz.values[i], v.values[i]));
    lz.max_ratio = std::max(lz.max_ratio, ratio(kv.values[i] + zeta.values[i], v.values[i]));
    ++lv.points;
    ++lz.points;
  }
  finish_line(lv);
  finish_line(lz);
  rep.lines = {lv, lz};
  return rep;
}

namespace {

struct MomentValues {
  double xp = 0.0, yone = 0.0, q = 0.0;
};

MomentValues moments_at(const MajorantSpec& spec, double s) {
  const double h = 0.005;
  const double lo = std::min(s, 0.0) - 120.0, hi = std::max(s, 0.0) + 80.0;
  const std::size_t n = static_cast<std::size_t>(std::ceil((hi - lo) / h)) + 1;
  const int N = spec.N;
  MomentValues v;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = lo + i * h;
    const double w = (i == 0 || i + 1 == n) ? 0.5 * h : h;
    const double sig = sigma_kernel(spec, Kernel::SigmaPlus, s, t);
    const double qn1 = t >= 0.0 ? std::exp(-N * t) : std::exp(-t);  // Q_{N,1}(e^{-t})
    v.xp += w * qn1 * sig;
    v.yone += w * (t < 0.0 ? std::exp(-t) : (1.0 + t) * std::exp(-N * t)) * sig;
  }
  v.q = s >= 0.0 ? std::exp(-spec.M * s) : std::exp(-s);  // Q_{M,1}(e^{-s})
  return v;
}

}  // namespace

CheckReport verify_sigma_moments(const MajorantSpec& spec, int n_points) {
  if (n_points < 2) throw std::invalid_argument("verify_sigma_moments: n_points >= 2");
  CheckReport rep;
  CheckLine xp{"moments_xp_finite", 0, 0.0, std::numeric_limits<double>::infinity(), true};
  CheckLine yone{"moments_yone_finite", 0, 0.0, std::numeric_limits<double>::infinity(), true};
  double c_small = 0.0, c_large = 0.0;
  for (int i = 0; i < n_points; ++i) {
    const double s = -6.0 + 12.0 * i / (n_points - 1);
    const MomentValues v = moments_at(spec, s);
    const double cx = v.xp / v.q, cy = v.yone / v.q;
    xp.max_ratio = std::max(xp.max_ratio, cx);
    yone.max_ratio = std::max(yone.max_ratio, cy);
    if (s <= 0.0) c_small = std::max(c_small, std::max(cx, cy));
    if (s > 0.0) c_large = std::max(c_large, std::max(cx, cy));
    ++xp.points;
    ++yone.points;
  }
  finish_line(xp);
  finish_line(yone);
  // Reading 1: C(s) uniform in s for fixed Lambda0.
  rep.stats.push_back({"uniform_C_s_le_0", c_small});
  rep.stats.push_back({"uniform_C_s_gt_0", c_large});
  rep.stats.push_back({"uniform_C_ratio_large_over_small", c_small > 0.0 ? c_large / c_small : 0.0});

  // Reading 2: the small-Lambda0 limit, C(s) <= C (s <= 0) and C (1 + s) (s > 0).
  CheckLine shape{"moments_limit_shape", 0, 0.0, 1.0, true};
  const double lams[3] = {0.04, 0.02, 0.01};
  for (double l0 : lams) {
    MajorantSpec sp = spec;
    sp.lambda0 = l0;
    sp.lambda_of = constant_lambda(l0);
    sp.finalize();
    double c0 = 0.0;
    std::vector<std::pair<double, double>> pos;
    for (int i = 0; i < n_points; ++i) {
      const double s = -6.0 + 12.0 * i / (n_points - 1);
      const MomentValues v = moments_at(sp, s);
      const double c = std::max(v.xp, v.yone) / v.q;
      if (s <= 0.0)
        c0 = std::max(c0, c);
      else
        pos.push_back({s, c});
    }
    double worst = 0.0;
    for (const auto& [s, c] : pos) worst = std::max(worst, c / (c0 * (1.0 + s)));
    shape.points += n_points;
    if (l0 == lams[2]) shape.max_ratio = worst;
    char name[64];
    std::snprintf(name, sizeof name, "limit_C_at_s3_lambda0_%.2f", l0);
    rep.stats.push_back({name, std::max(moments_at(sp, 3.0).xp, moments_at(sp, 3.0).yone) / moments_at(sp, 3.0).q});
    std::snprintf(name, sizeof name, "limit_shape_ratio_lambda0_%.2f", l0);
    rep.stats.push_back({name, worst});
  }
  finish_line(shape);
  rep.lines = {xp, yone, shape};
  return rep;
}

}  // namespace layerpot
