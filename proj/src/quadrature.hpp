#pragma once

// Internal quadrature helpers shared by the operator and oracle code.

#include <array>
#include <cmath>
#include <vector>

#include "layerpot/grid.hpp"

namespace layerpot::detail {

struct Rule {
  std::vector<double> x, w;
};

/// Gauss-Legendre rule with n nodes on [a, b].
Rule gauss_legendre(int n, double a, double b);

/// Gauss-Laguerre rule for int_0^inf exp(-kappa t) F(t) dt.
Rule gauss_laguerre(int n, double kappa);

/// Smooth cut-off: 1 on [0, t0], 0 on [1, inf), C^inf in between.
inline double window(double t, double t0) {
  if (t <= t0) return 1.0;
  if (t >= 1.0) return 0.0;
  const double v = (t - t0) / (1.0 - t0);
  return std::exp(2.0 * std::exp(-1.0 / v) / (v - 1.0));
}

/// Weights c_l for extrapolating I(eps / 2^l), l = 0..L-1, to eps -> 0
/// assuming I is a polynomial of degree L-1 in eps.
std::vector<double> richardson_weights(int levels);

/// Six-point Lagrange stencil on the log-polar grid: value at a point is
/// sum_{p,q} ws[p] wa[q] u(j0 + p, a0 + q mod A).
struct Stencil {
  int j0 = 0, a0 = 0;
  std::array<double, 6> ws{}, wa{};
};

/// Returns false when the point lies outside r_min <= |y| <= r_max.
bool stencil_at(const AnnularGrid& g, double log_rho, double theta, Stencil& st);

double interpolate(const ScalarField& u, const Stencil& st);

}  // namespace layerpot::detail
