#include "quadrature.hpp"

#include <gsl/gsl_integration.h>

#include <stdexcept>

namespace layerpot::detail {

Rule gauss_legendre(int n, double a, double b) {
  Rule r;
  gsl_integration_glfixed_table* t = gsl_integration_glfixed_table_alloc(n);
  for (int i = 0; i < n; ++i) {
    double x = 0.0, w = 0.0;
    gsl_integration_glfixed_point(a, b, i, &x, &w, t);
    r.x.push_back(x);
    r.w.push_back(w);
  }
  gsl_integration_glfixed_table_free(t);
  return r;
}

Rule gauss_laguerre(int n, double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("gauss_laguerre needs kappa > 0");
  gsl_integration_fixed_workspace* w =
      gsl_integration_fixed_alloc(gsl_integration_fixed_laguerre, n, 0.0, kappa, 0.0, 0.0);
  if (!w) throw std::runtime_error("gauss_laguerre: allocation failed");
  Rule r;
  const double* x = gsl_integration_fixed_nodes(w);
  const double* wt = gsl_integration_fixed_weights(w);
  r.x.assign(x, x + n);
  r.w.assign(wt, wt + n);
  gsl_integration_fixed_free(w);
  return r;
}

std::vector<double> richardson_weights(int levels) {
  if (levels < 1) throw std::invalid_argument("richardson_weights: levels >= 1");
  // Solve sum_l c_l 2^{-l k} = delta_{k0}, k = 0..L-1 (Vandermonde in 2^{-l}).
  const int L = levels;
  std::vector<std::vector<double>> m(L, std::vector<double>(L + 1, 0.0));
  for (int k = 0; k < L; ++k) {
    for (int l = 0; l < L; ++l) m[k][l] = std::pow(2.0, -double(l) * k);
    m[k][L] = k == 0 ? 1.0 : 0.0;
  }
  for (int c = 0; c < L; ++c) {
    int piv = c;
    for (int r = c + 1; r < L; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    std::swap(m[c], m[piv]);
    for (int r = 0; r < L; ++r) {
      if (r == c) continue;
      const double f = m[r][c] / m[c][c];
      for (int q = c; q <= L; ++q) m[r][q] -= f * m[c][q];
    }
  }
  std::vector<double> out(L);
  for (int l = 0; l < L; ++l) out[l] = m[l][L] / m[l][l];
  return out;
}

namespace {

void lagrange6(double f, std::array<double, 6>& w) {
  // nodes 0..5; denominators prod_{m != k}(k - m)
  static const double den[6] = {-120.0, 24.0, -12.0, 12.0, -24.0, 120.0};
  double d[6];
  for (int k = 0; k < 6; ++k) d[k] = f - k;
  for (int k = 0; k < 6; ++k) {
    double p = 1.0;
    for (int m = 0; m < 6; ++m)
      if (m != k) p *= d[m];
    w[k] = p / den[k];
  }
}

}  // namespace

bool stencil_at(const AnnularGrid& g, double log_rho, double theta, Stencil& st) {
  const double lo = std::log(g.r_min()), hi = std::log(g.r_max());
  if (log_rho < lo || log_rho > hi) return false;
  const int nr = g.n_radial(), na = g.n_angular();
  const double pos = (log_rho - lo) / g.h() - 0.5;
  int j0 = static_cast<int>(std::floor(pos)) - 2;
  j0 = std::max(0, std::min(j0, nr - 6));
  lagrange6(pos - j0, st.ws);
  st.j0 = j0;
  const double dth = 2.0 * M_PI / na;
  const double apos = theta / dth;
  const int af = static_cast<int>(std::floor(apos));
  lagrange6(apos - (af - 2), st.wa);
  st.a0 = ((af - 2) % na + na) % na;
  return true;
}

double interpolate(const ScalarField& u, const Stencil& st) {
  const AnnularGrid& g = u.g();
  const int na = g.n_angular();
  double s = 0.0;
  for (int p = 0; p < 6; ++p) {
    double row = 0.0;
    const std::size_t base = g.index(st.j0 + p, 0);
    for (int q = 0; q < 6; ++q) {
      int a = st.a0 + q;
      if (a >= na) a -= na;
      row += st.wa[q] * u[base + a];
    }
    s += st.ws[p] * row;
  }
  return s;
}

}  // namespace layerpot::detail
