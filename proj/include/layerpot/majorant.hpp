#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "layerpot/geometry.hpp"
#include "layerpot/grid.hpp"

namespace layerpot {

/// Samples on a uniform grid in t = -log r (ascending t, i.e. descending r).
struct LogProfile {
  std::vector<double> t;
  std::vector<double> values;
  double step() const { return t.size() > 1 ? t[1] - t[0] : 0.0; }
  std::size_t size() const { return t.size(); }
  /// Linear interpolation; zero outside the grid.
  double at(double tt) const;
};

/// Uniform t-grid with step ln 2 / J over [-log r_max, -log r_min].
LogProfile make_t_grid(const AnnularGrid& g);
/// Profile on the t-grid of g. Radii not covered by `prof` (the outer edge
/// octave) are continued geometrically from its last octave.
LogProfile to_log_profile(const SeminormProfile& prof, const AnnularGrid& g);
void write_log_profile_csv(const std::string& path, const LogProfile& p);

using LambdaFn = std::function<double(double)>;  // nu -> Lambda(exp(-nu))

LambdaFn lambda_of_surface(const LipschitzSurface& s);
LambdaFn constant_lambda(double lambda0);

class LambdaIntegral;

struct MajorantSpec {
  int N = 2;
  double lambda0 = 0.0;
  LambdaFn lambda_of;
  double c1 = 10.0, c2 = 10.0, c3 = 10.0;
  double C_K = 1.0;
  double M = 2.0;
  double lambda_star = 0.05;
  std::shared_ptr<const LambdaIntegral> integral;  // cumulative int lambda; set by finalize()

  double lambda(double nu) const { return lambda_of(nu); }
  /// int_a^b lambda, trapezoid on a step-(ln 2 / 8) table (exact additivity).
  double int_lambda(double a, double b) const;
  /// Left side of the constant inequality with Lambda* in place of Lambda0.
  double krav_lhs() const;
  /// Rebuilds M and the integral table after changing lambda_of or c2.
  void finalize();
};

struct InfeasibleConstants : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InadmissibleLambda : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Smallest c1 = c2 on the grid 10 * 2^k, then the smallest c3 on the same
/// grid, such that the constant inequality holds with left side <= 0.95.
/// The inequality is evaluated with the worst admissible M = N - c2 Lambda*.
/// lambda_of defaults to the constant lambda0.
MajorantSpec choose_constants(int N, double lambda0, double C_K_estimate, double lambda_star = 0.05,
                              LambdaFn lambda_of = nullptr);

enum class Kernel { SigmaPlus, SigmaMinus, E, D };
/// SigmaPlus/SigmaMinus (s, sigma); E (tau, sigma), tau >= sigma branch at
/// equality; D (a, b) = exp(c1 int_a^b lambda).
double sigma_kernel(const MajorantSpec& spec, Kernel which, double a, double b);
/// Both branch values of E at tau = sigma: {lambda^2 (tau <= sigma), 2 lambda^2 (tau >= sigma)}.
std::pair<double, double> e_branches_at_diagonal(const MajorantSpec& spec, double tau);
/// Q_{N,0}(e^{t - tau}) E(tau, sigma).
double e3(const MajorantSpec& spec, double t, double tau, double sigma);

struct ProfileResult {
  LogProfile profile;
  bool diverged = false;  // an end octave of the defining integral adds > 1%
  double tail_share = 0.0;
};

/// (K zeta)(t) = C_K int int Q_{N,0}(e^{t-tau}) E(tau, sigma) zeta(sigma) dsigma dtau.
ProfileResult kk_apply(const MajorantSpec& spec, const LogProfile& zeta);
/// int int E_1(rho, xi) zeta d xi/xi d rho/rho = (K zeta)(0) / C_K, the domain
/// integral; applied to N_p(u; .) it is the norm of the fixed-point space.
double domain_integral(const MajorantSpec& spec, const LogProfile& zeta, bool* diverged = nullptr);
/// int E(t, sigma) zeta(sigma) dsigma: in radii, int E_r(rho) zeta(rho) d rho / rho.
LogProfile e_transform(const MajorantSpec& spec, const LogProfile& zeta);
/// int Q_{N,0}(e^{t - s}) zeta(s) ds: in radii, int Q_{N,0}(rho / r) zeta(rho) d rho / rho.
LogProfile q_transform(const MajorantSpec& spec, const LogProfile& zeta);
/// v(t) = c3 int_{-inf}^t D(s,t) zeta(s) ds + c3 int_t^inf e^{M(t-s)} zeta(s) ds.
ProfileResult majorant_v(const MajorantSpec& spec, const LogProfile& zeta);

struct SigmaResult {
  LogProfile sigma;
  int iterations = 0;
  bool monotone = true;
};
/// sigma_0 = 0, sigma_{n+1} = K sigma_n + kz. Throws std::runtime_error after max_iter.
SigmaResult minimal_sigma(const MajorantSpec& spec, const LogProfile& kz, int max_iter = 500, double tol = 1e-12);

/// c3 int_0^r (rho/r)^M zeta drho/rho + c3 int_r^inf D(r, rho) zeta drho/rho, with zeta(s) = N_p(grad f; e^{-s}).
double bound_global(const MajorantSpec& spec, const LogProfile& grad_seminorms, double r);

struct LocalBound {
  double near = 0.0;    // int_0^r (rho/r)^M N_p(grad f; rho)
  double middle = 0.0;  // int_r^{2 r0} exp(c1 int_r^rho Lambda) N_p(grad f; rho)
  double local = 0.0;   // (||u||_X + int_{r0/2}^{2r0} N_p(f; rho)) exp(c1 int_r^{r0} Lambda)
  double total() const { return near + middle + local; }
};
/// Three-term local bound with C = 1.
LocalBound bound_local(const MajorantSpec& spec, const LogProfile& grad_seminorms, double u_xp_norm,
                     const LogProfile& f_seminorms, double r, double r0);

struct CheckLine {
  std::string name;
  std::int64_t points = 0;
  double max_ratio = 0.0;  // lhs / rhs
  double slack = 0.0;      // pass iff max_ratio <= 1 + slack (and finite)
  bool pass = true;
  double margin() const { return 1.0 + slack - max_ratio; }
};

struct CheckReport {
  std::vector<CheckLine> lines;
  std::vector<std::pair<std::string, double>> stats;  // extra named statistics
  bool pass() const;
  const CheckLine& line(const std::string& name) const;
  std::string text() const;
};

/// Brute-force double integrals against c Sigma(s, t), with 2% slack.
CheckReport verify_kernel_composition(const MajorantSpec& spec, int n_pairs, std::uint64_t seed);
/// K v + kz <= v and K z + zeta <= z (z(r) = v(-log r)) on the t-grid, 2% slack.
CheckReport verify_supersolution(const MajorantSpec& spec, const LogProfile& zeta, const LogProfile& kz);
/// Both Sigma^+ moment integrals at n_points values of s in [-6, 6].
CheckReport verify_sigma_moments(const MajorantSpec& spec, int n_points);

}  // namespace layerpot
