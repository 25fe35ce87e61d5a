#include <algorithm>
#include <cmath>
#include <random>

#include <gsl/gsl_integration.h>
#include <gtest/gtest.h>

#include "layerpot/majorant.hpp"

using namespace layerpot;

namespace {

template <class F>
double integrate(F f, double a, double b, double rel = 1e-9) {
  gsl_integration_workspace* w = gsl_integration_workspace_alloc(4000);
  gsl_function gf;
  gf.function = [](double x, void* p) { return (*static_cast<F*>(p))(x); };
  gf.params = &f;
  double res = 0.0, err = 0.0;
  gsl_integration_qags(&gf, a, b, 1e-14, rel, 4000, w, &res, &err);
  gsl_integration_workspace_free(w);
  return res;
}

// Integrates over [a, b] split at the interior break points.
template <class F>
double integrate_split(F f, double a, double b, std::initializer_list<double> breaks, double rel = 1e-9) {
  std::vector<double> pts{a};
  for (double x : breaks)
    if (x > a && x < b) pts.push_back(x);
  pts.push_back(b);
  std::sort(pts.begin(), pts.end());
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) s += integrate(f, pts[i], pts[i + 1], rel);
  return s;
}

MajorantSpec spec_with(double lambda0, double c = 10.0, double C_K = 1.0) {
  MajorantSpec s;
  s.lambda0 = lambda0;
  s.c1 = s.c2 = s.c3 = c;
  s.C_K = C_K;
  s.finalize();
  return s;
}

LogProfile grid_profile(double (*f)(double)) {
  LogProfile p = make_t_grid(*make_grid());
  for (std::size_t i = 0; i < p.size(); ++i) p.values[i] = f(p.t[i]);
  return p;
}

double two_sided(double s) { return std::exp(-std::abs(s)); }

}  // namespace

TEST(Kernels, VanishingModulus) {
  const MajorantSpec s = spec_with(0.0);
  EXPECT_EQ(s.M, 2.0);
  for (double a : {-2.0, 0.0, 1.5})
    for (double b : {-1.0, 0.0, 3.0}) {
      EXPECT_DOUBLE_EQ(sigma_kernel(s, Kernel::SigmaPlus, a, b), a <= b ? 1.0 : std::exp(2.0 * (b - a)));
      EXPECT_EQ(sigma_kernel(s, Kernel::E, a, b), 0.0);
      EXPECT_EQ(sigma_kernel(s, Kernel::D, a, b), 1.0);
    }
}

TEST(Kernels, ConstantModulus) {
  const MajorantSpec s = spec_with(0.02);
  EXPECT_NEAR(s.M, 1.8, 1e-15);
  EXPECT_NEAR(sigma_kernel(s, Kernel::SigmaPlus, -1.0, 2.0), std::exp(10 * 0.02 * 3.0), 1e-13);
  EXPECT_NEAR(sigma_kernel(s, Kernel::SigmaMinus, -1.0, 2.0), std::exp(-10 * 0.02 * 3.0), 1e-13);
  EXPECT_NEAR(sigma_kernel(s, Kernel::SigmaPlus, 2.0, -1.0), std::exp(-1.8 * 3.0), 1e-15);
  EXPECT_NEAR(sigma_kernel(s, Kernel::E, 0.0, 1.0), 4e-4 * std::exp(-2.0), 1e-18);
  const auto [below, above] = e_branches_at_diagonal(s, 0.3);
  EXPECT_NEAR(below, 4e-4, 1e-18);
  EXPECT_NEAR(above, 8e-4, 1e-18);
  // tau >= sigma is the branch taken at equality
  EXPECT_NEAR(sigma_kernel(s, Kernel::E, 0.3, 0.3), above, 1e-18);
}

TEST(Kernels, DIsMultiplicative) {
  MajorantSpec s = spec_with(0.05);
  s.lambda_of = lambda_of_surface(LipschitzSurface::wave(0.05));
  s.finalize();
  const double h = std::log(2.0) / 8;
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> k(-60, 60);
  for (int i = 0; i < 200; ++i) {
    int a = k(rng), b = k(rng), c = k(rng);
    if (a > b) std::swap(a, b);
    if (b > c) std::swap(b, c);
    if (a > b) std::swap(a, b);
    const double dab = sigma_kernel(s, Kernel::D, a * h, b * h), dbc = sigma_kernel(s, Kernel::D, b * h, c * h);
    const double dac = sigma_kernel(s, Kernel::D, a * h, c * h);
    EXPECT_NEAR(dab * dbc, dac, 1e-10 * dac);
  }
}

TEST(Constants, ChosenValuesSatisfyTheInequality) {
  for (double ck : {1e-2, 0.1, 0.343}) {
    const MajorantSpec s = choose_constants(2, 0.02, ck);
    // independent re-evaluation with Lambda* = 0.05
    const double Mw = 2 - s.c2 * 0.05;
    const double q = 3 * 0.05 / Mw + 1 / s.c1 + 1 / s.c2;
    const double lhs = ck * (2 * q * q + 1 / s.c3);
    EXPECT_LE(lhs, 0.95) << ck;
    EXPECT_NEAR(s.krav_lhs(), lhs, 1e-14);
    EXPECT_LE(s.c1 * 0.05, 0.5);
    EXPECT_LE(s.c2 * 0.05, 0.5);
    EXPECT_NEAR(s.M, 2 - s.c2 * 0.02, 1e-15);
    EXPECT_GE(s.M, 1.5);
    EXPECT_LE(s.M, 2.0);
    // the next smaller c on the grid is infeasible
    const double c = s.c1 / 2;
    const double qs = 3 * 0.05 / (2 - c * 0.05) + 2 / c;
    EXPECT_GT(2 * qs * qs, 0.95 / ck) << ck;
  }
}

TEST(Constants, ZeroModulusGivesM2) {
  const MajorantSpec s = choose_constants(2, 0.0, 0.1);
  EXPECT_EQ(s.M, 2.0);
}

TEST(Constants, Errors) {
  EXPECT_THROW(choose_constants(2, 0.02, 10.0), InfeasibleConstants);
  EXPECT_THROW(choose_constants(2, 0.4, 0.1), InadmissibleLambda);
  EXPECT_THROW(choose_constants(2, 0.02, 0.0), std::invalid_argument);
}

TEST(Operator, VanishesWithoutModulus) {
  const MajorantSpec s = spec_with(0.0);
  const ProfileResult r = kk_apply(s, grid_profile(two_sided));
  for (double v : r.profile.values) EXPECT_EQ(v, 0.0);
  const ProfileResult z = kk_apply(spec_with(0.02), grid_profile([](double) { return 0.0; }));
  for (double v : z.profile.values) EXPECT_EQ(v, 0.0);
}

TEST(Operator, LinearHomogeneousMonotone) {
  const MajorantSpec s = spec_with(0.02);
  const LogProfile a = grid_profile(two_sided);
  const LogProfile b = grid_profile([](double t) { return 1.0 / (1.0 + t * t); });
  LogProfile comb = a;
  for (std::size_t i = 0; i < a.size(); ++i) comb.values[i] = 2.5 * a.values[i] + 0.75 * b.values[i];
  const LogProfile ka = kk_apply(s, a).profile, kb = kk_apply(s, b).profile, kc = kk_apply(s, comb).profile;
  const LogProfile va = majorant_v(s, a).profile, vb = majorant_v(s, b).profile, vc = majorant_v(s, comb).profile;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double k = 2.5 * ka.values[i] + 0.75 * kb.values[i];
    EXPECT_NEAR(kc.values[i], k, 1e-12 * std::abs(k) + 1e-300);
    const double v = 2.5 * va.values[i] + 0.75 * vb.values[i];
    EXPECT_NEAR(vc.values[i], v, 1e-12 * std::abs(v) + 1e-300);
    // a <= comb pointwise
    EXPECT_LE(ka.values[i], kc.values[i]);
    EXPECT_LE(va.values[i], vc.values[i]);
  }
}

TEST(Operator, MatchesNestedQuadrature) {
  // (K zeta)(t) = C_K int int Q(e^{t - tau}) E(tau, sigma) zeta(sigma), zeta = e^{-|s|}, over the grid range
  const MajorantSpec s = spec_with(0.02);
  const LogProfile z = grid_profile(two_sided);
  const LogProfile kz = kk_apply(s, z).profile;
  const double lo = z.t.front(), hi = z.t.back(), lam = 0.02;
  for (double target : {-2.0, 0.0, 1.5}) {
    const std::size_t k = static_cast<std::size_t>(std::lround((target - lo) / z.step()));
    const double t = z.t[k];
    auto outer = [&](double tau) {
      const double q = tau >= t ? std::exp(2 * (t - tau)) : 1.0;
      auto inner = [&](double sg) {
        const double e = tau < sg ? lam * lam * std::exp(2 * (tau - sg)) : lam * (lam * std::exp(sg - tau) + lam);
        return e * two_sided(sg);
      };
      return q * integrate_split(inner, lo, hi, {tau, 0.0});
    };
    const double oracle = s.C_K * integrate_split(outer, lo, hi, {t, 0.0}, 1e-7);
    EXPECT_NEAR(kz.values[k], oracle, 1e-2 * oracle) << t;
  }
}

TEST(Majorant, ZeroProfile) {
  const ProfileResult r = majorant_v(spec_with(0.02), grid_profile([](double) { return 0.0; }));
  for (double v : r.profile.values) EXPECT_EQ(v, 0.0);
}

TEST(Majorant, IndicatorClosedForm) {
  // Lambda = 0: v(t) = c3 (int_{-inf}^t 1_[0,1] + int_t^inf e^{2(t-s)} 1_[0,1])
  const MajorantSpec s = spec_with(0.0);
  const LogProfile z = grid_profile([](double t) { return t >= 0.0 && t <= 1.0 ? 1.0 : 0.0; });
  const LogProfile v = majorant_v(s, z).profile;
  auto exact = [](double t) {
    const double first = std::clamp(t, 0.0, 1.0);
    double second = 0.0;
    if (t < 0) second = std::exp(2 * t) * (1 - std::exp(-2.0)) / 2;
    else if (t <= 1) second = (1 - std::exp(2 * (t - 1))) / 2;
    return 10.0 * (first + second);
  };
  // the indicator's jumps fall between nodes: one step of slack
  const double h = z.step();
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(v.values[i], exact(z.t[i]), 10.0 * h) << z.t[i];
}

TEST(Majorant, MatchesQuadratureWithModulus) {
  const MajorantSpec s = spec_with(0.02);
  const LogProfile z = grid_profile(two_sided);
  const ProfileResult v = majorant_v(s, z);
  EXPECT_FALSE(v.diverged);
  const double lo = z.t.front(), hi = z.t.back();
  for (std::size_t k = 8; k < z.size(); k += 16) {
    const double t = z.t[k];
    const double a = integrate_split([&](double x) { return std::exp(0.2 * (t - x)) * two_sided(x); }, lo, t, {0.0});
    const double b = integrate_split([&](double x) { return std::exp(1.8 * (t - x)) * two_sided(x); }, t, hi, {0.0});
    const double oracle = 10.0 * (a + b);
    EXPECT_NEAR(v.profile.values[k], oracle, 1e-2 * oracle) << t;
  }
}

TEST(MinimalSigma, TrivialCases) {
  const LogProfile zero = grid_profile([](double) { return 0.0; });
  const SigmaResult a = minimal_sigma(spec_with(0.02), zero);
  EXPECT_EQ(a.iterations, 1);
  for (double v : a.sigma.values) EXPECT_EQ(v, 0.0);
  // K = 0: the first iterate is kz; the second confirms it
  const LogProfile kz = grid_profile(two_sided);
  const SigmaResult b = minimal_sigma(spec_with(0.0), kz);
  EXPECT_LE(b.iterations, 2);
  for (std::size_t i = 0; i < kz.size(); ++i) EXPECT_EQ(b.sigma.values[i], kz.values[i]);
  LogProfile neg = kz;
  neg.values[3] = -1.0;
  EXPECT_THROW(minimal_sigma(spec_with(0.0), neg), std::invalid_argument);
}

TEST(MinimalSigma, BelowAnySupersolution) {
  // kz = v - K v leaves v a supersolution, so the minimal solution lies below v
  const MajorantSpec s = choose_constants(2, 0.02, 0.3);
  const LogProfile v = majorant_v(s, grid_profile(two_sided)).profile;
  const LogProfile kv = kk_apply(s, v).profile;
  LogProfile kz = v;
  for (std::size_t i = 0; i < v.size(); ++i) kz.values[i] = std::max(0.0, v.values[i] - kv.values[i]);
  const SigmaResult r = minimal_sigma(s, kz);
  EXPECT_TRUE(r.monotone);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_LE(r.sigma.values[i], v.values[i] * (1 + 1e-9)) << i;
}

TEST(Bounds, GlobalZeroGradient) {
  const LogProfile zero = grid_profile([](double) { return 0.0; });
  EXPECT_EQ(bound_global(spec_with(0.02), zero, 1.0), 0.0);
  EXPECT_THROW(bound_global(spec_with(0.02), zero, 1e4), std::invalid_argument);
}

TEST(Bounds, GlobalMatchesQuadrature) {
  // decay1: |grad f| = rho (1+rho^2)^{-3/2}, so N_2(grad f; rho) = rho^{-1} (2 pi int_rho^{2 rho} r^3 (1+r^2)^{-3} dr)^{1/2}
  auto N = [](double rho) {
    auto prim = [](double r) {
      const double q = 1 + r * r;
      return 0.5 * (-1.0 / q + 0.5 / (q * q));  // antiderivative of r^3 / (1+r^2)^3
    };
    return std::sqrt(2 * M_PI * (prim(2 * rho) - prim(rho))) / rho;
  };
  LogProfile z = make_t_grid(*make_grid());
  for (std::size_t i = 0; i < z.size(); ++i) z.values[i] = N(std::exp(-z.t[i]));
  const double lo = z.t.front(), hi = z.t.back();
  for (double lam : {0.0, 0.02}) {
    const MajorantSpec s = spec_with(lam);
    const double r = 1.0;
    const double near = integrate([&](double rho) { return std::pow(rho / r, s.M) * N(rho) / rho; }, std::exp(-hi), r);
    const double far =
        integrate([&](double rho) { return std::pow(rho / r, 10.0 * lam) * N(rho) / rho; }, r, std::exp(-lo));
    const double oracle = 10.0 * (near + far);
    EXPECT_NEAR(bound_global(s, z, r), oracle, 1e-2 * oracle) << lam;
  }
}

TEST(Bounds, LocalShape) {
  const LogProfile zero = grid_profile([](double) { return 0.0; });
  EXPECT_EQ(bound_local(spec_with(0.02), zero, 0.0, zero, 0.25, 1.0).total(), 0.0);
  // Lambda = 0: no growth in the local term
  const LogProfile f = grid_profile([](double) { return 1.0; });
  const LocalBound b = bound_local(spec_with(0.0), zero, 0.7, f, 0.25, 1.0);
  EXPECT_NEAR(b.local, 0.7 + 2 * std::log(2.0), 1e-12);
  const LocalBound g = bound_local(spec_with(0.02), zero, 0.7, f, 0.25, 1.0);
  EXPECT_NEAR(g.local, (0.7 + 2 * std::log(2.0)) * std::exp(10 * 0.02 * std::log(4.0)), 1e-10);
  EXPECT_THROW(bound_local(spec_with(0.0), zero, 0.0, zero, 1.0, 1.0), std::invalid_argument);
}

TEST(Verification, CompositionWithoutModulus) {
  const CheckReport r = verify_kernel_composition(spec_with(0.0), 40, 1);
  EXPECT_TRUE(r.pass()) << r.text();
  for (const auto& l : r.lines) EXPECT_EQ(l.max_ratio, 0.0) << l.name;
}

TEST(Verification, CompositionAtThreshold) {
  const CheckReport r = verify_kernel_composition(choose_constants(2, 0.05, 0.3), 60, 2);
  EXPECT_TRUE(r.pass()) << r.text();
  for (const auto& l : r.lines) {
    EXPECT_EQ(l.points, 60) << l.name;
    EXPECT_GE(l.margin(), 0.0) << l.name;
  }
}

TEST(Verification, SupersolutionWithoutModulus) {
  // Lambda = 0 reduces to kz <= v
  const MajorantSpec s = spec_with(0.0);
  const LogProfile z = grid_profile(two_sided);
  LogProfile kz = majorant_v(s, z).profile;
  for (double& v : kz.values) v *= 0.5;
  EXPECT_TRUE(verify_supersolution(s, z, kz).pass());
  for (double& v : kz.values) v *= 4.0;
  EXPECT_FALSE(verify_supersolution(s, z, kz).pass());
}

TEST(Verification, SigmaMomentsFinite) {
  const CheckReport r = verify_sigma_moments(choose_constants(2, 0.02, 0.3), 9);
  for (const auto& l : r.lines) {
    EXPECT_TRUE(std::isfinite(l.max_ratio)) << l.name;
    EXPECT_GE(l.points, 9) << l.name;
  }
}
