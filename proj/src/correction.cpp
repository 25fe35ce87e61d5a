#include <gsl/gsl_integration.h>

#include <cmath>
#include <stdexcept>

#include "layerpot/operators.hpp"
#include "quadrature.hpp"

namespace layerpot {

namespace {

double unit_sphere_area(int N) { return 2.0 * std::pow(M_PI, 0.5 * N) / std::tgamma(0.5 * N); }

// Unnormalised bump on t = rho / r0 in [1, 2]; C^2 at both ends.
double raw_bump(double t) {
  if (t <= 1.0 || t >= 2.0) return 0.0;
  const double s = (t - 1.0) * (2.0 - t);
  return s * s * s;
}

}  // namespace

double cutoff_eta(double rho, double r0) { return detail::window(rho / r0 - 1.0, 0.0); }

// d eta / d rho for eta = window(rho / r0 - 1, 0).
double cutoff_eta_deriv(double rho, double r0) {
  const double v = rho / r0 - 1.0;
  if (v <= 0.0 || v >= 1.0) return 0.0;
  const double e = std::exp(-1.0 / v);
  const double w = detail::window(v, 0.0);
  return w * 2.0 * (e / (v * v * (v - 1.0)) - e / ((v - 1.0) * (v - 1.0))) / r0;
}


double chi_normalisation(int N) {
  gsl_integration_workspace* w = gsl_integration_workspace_alloc(200);
  gsl_function F;
  F.function = [](double t, void*) { return raw_bump(t) / t; };
  F.params = nullptr;
  double val = 0.0, err = 0.0;
  gsl_integration_qag(&F, 1.0, 2.0, 0.0, 1e-12, 200, GSL_INTEG_GAUSS61, w, &val, &err);
  gsl_integration_workspace_free(w);
  return (N / unit_sphere_area(N)) / val;
}

double bump_chi(double rho, double r0) {
  static const double c2 = chi_normalisation(2);
  return c2 * raw_bump(rho / r0);
}

CorrectionSpec commutator_correction(const ScalarField& u, const LipschitzSurface& surface, double r0) {
  const GridPtr& gp = u.grid();
  const AnnularGrid& g = *gp;
  const int N = g.dim();
  if (N != 2) throw std::invalid_argument("commutator_correction: N = 2 only");
  if (!(r0 > g.r_min() && 2.0 * r0 < g.r_max())) throw std::invalid_argument("commutator_correction: r0 outside grid");
  CorrectionSpec spec;
  spec.r0 = r0;
  spec.eta = ScalarField(gp);
  spec.psi_corr = ScalarField(gp);
  spec.gamma.assign(N, 0.0);
  std::vector<double> M(N * N, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point y = g.node(i);
    const double rho = norm(y, N);
    const double eta = cutoff_eta(rho, r0);
    spec.eta[i] = eta;
    const double om = surface_eval(surface, y).omega;
    const double w = g.weight(i) * om * std::pow(rho, -N);
    const double chi = bump_chi(rho, r0);
    for (int a = 0; a < N; ++a) {
      spec.gamma[a] += w * (1.0 - eta) * u[i] * y[a] / rho;
      for (int b = 0; b < N; ++b) M[a * N + b] += w * chi * y[a] * y[b] / (rho * rho);
    }
  }
  // Psi = -chi sum_i beta_i y_i/|y| with M beta = gamma, so the discrete moments
  // cancel exactly also when omega != 1 (for omega = 1, M = Id and beta = gamma).
  const double det = M[0] * M[3] - M[1] * M[2];
  spec.beta = {(M[3] * spec.gamma[0] - M[1] * spec.gamma[1]) / det,
               (M[0] * spec.gamma[1] - M[2] * spec.gamma[0]) / det};
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point y = g.node(i);
    const double rho = norm(y, N);
    const double chi = bump_chi(rho, r0);
    if (chi == 0.0) continue;
    spec.psi_corr[i] = -chi * (spec.beta[0] * y[0] + spec.beta[1] * y[1]) / rho;
  }
  spec.moment_residual.assign(N, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (spec.psi_corr[i] == 0.0) continue;
    const Point y = g.node(i);
    const double rho = norm(y, N);
    const double om = surface_eval(surface, y).omega;
    for (int k = 0; k < N; ++k)
      spec.moment_residual[k] += g.weight(i) * om * spec.psi_corr[i] * y[k] * std::pow(rho, -N - 1);
  }
  for (int k = 0; k < N; ++k) spec.moment_residual[k] += spec.gamma[k];

  double ci = 0.0;
  for (int j = 0; j < g.n_radial(); ++j) ci += bump_chi(g.radius(j), r0) * g.h();
  spec.chi_integral = ci;
  return spec;
}

ScalarField commutator_field(const OperatorEngine& e, const ScalarField& u, const CorrectionSpec& spec,
                             OpDiagnostics* d) {
  const ScalarField w = hadamard(spec.eta, u) + spec.psi_corr;
  return single_layer(e, w, d) - hadamard(spec.eta, single_layer(e, u, d));
}

VectorField commutator_field_grad(const OperatorEngine& e, const ScalarField& u, const CorrectionSpec& spec,
                                  OpDiagnostics* d) {
  const AnnularGrid& g = e.grid();
  const ScalarField w = hadamard(spec.eta, u) + spec.psi_corr;
  const VectorField gw = single_layer_grad(e, w, d);
  const VectorField gu = single_layer_grad(e, u, d);
  const ScalarField su = single_layer(e, u, d);
  VectorField out;
  for (int k = 0; k < 2; ++k) {
    ScalarField deta(e.grid_ptr());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Point x = g.node(i);
      const double rho = norm(x, 2);
      deta[i] = cutoff_eta_deriv(rho, spec.r0) * x[k] / rho;
    }
    out.push_back(gw[k] - hadamard(deta, su) - hadamard(spec.eta, gu[k]));
  }
  return out;
}

}  // namespace layerpot
