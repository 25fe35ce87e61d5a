#include <fftw3.h>
#include <gsl/gsl_sf_bessel.h>

#include <cmath>
#include <complex>
#include <stdexcept>

#include "layerpot/operators.hpp"
#include "quadrature.hpp"

namespace layerpot {

namespace {

// F(a) = int_0^a J_0(s) ds on a uniform table, cumulative 4-point Gauss.
class J0Integral {
 public:
  explicit J0Integral(double a_max) : step_(0.05) {
    const int n = static_cast<int>(std::ceil(a_max / step_)) + 2;
    table_.resize(n + 1);
    table_[0] = 0.0;
    const detail::Rule r = detail::gauss_legendre(4, 0.0, step_);
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int q = 0; q < 4; ++q) s += r.w[q] * gsl_sf_bessel_J0(i * step_ + r.x[q]);
      table_[i + 1] = table_[i] + s;
    }
  }
  double operator()(double a) const {
    const double pos = a / step_;
    const int i = std::min(static_cast<int>(pos), static_cast<int>(table_.size()) - 2);
    // add the exact remainder over [i*step, a] with a short Gauss rule
    const double a0 = i * step_;
    if (a <= a0) return table_[i];
    const detail::Rule r = detail::gauss_legendre(4, a0, a);
    double s = 0.0;
    for (int q = 0; q < 4; ++q) s += r.w[q] * gsl_sf_bessel_J0(r.x[q]);
    return table_[i] + s;
  }

 private:
  double step_;
  std::vector<double> table_;
};

struct FftGrid {
  int n = 0;        // physical points per side
  int m = 0;        // padded points per side (2n)
  double half = 0;  // physical half-width
  double dx = 0;
};

FftGrid make_fft_grid(const AnnularGrid& g, int points_per_side) {
  if (points_per_side < 16 || points_per_side % 2 != 0)
    throw std::invalid_argument("oracle: points_per_side must be even and >= 16");
  FftGrid f;
  f.n = points_per_side;
  f.m = 2 * points_per_side;
  f.half = g.r_max() / 4.0;
  f.dx = 2.0 * f.half / f.n;
  return f;
}

double coord(const FftGrid& f, int i) { return -f.half + (i + 0.5) * f.dx; }

// Nodal values by the analytic source when present, else log-polar interpolation.
std::vector<double> resample(const ScalarField& u, const FftGrid& f) {
  const AnnularGrid& g = u.g();
  std::vector<double> out(static_cast<std::size_t>(f.n) * f.n);
  detail::Stencil st;
  for (int i = 0; i < f.n; ++i)
    for (int j = 0; j < f.n; ++j) {
      const Point x{coord(f, i), coord(f, j), 0.0};
      double v;
      if (u.has_source()) {
        v = u.source()(x);
      } else {
        const double r = std::max(std::hypot(x[0], x[1]), g.r_min());
        v = detail::stencil_at(g, std::log(r), std::atan2(x[1], x[0]), st) ? detail::interpolate(u, st) : 0.0;
      }
      out[static_cast<std::size_t>(i) * f.n + j] = v;
    }
  return out;
}

void check_boundary(const std::vector<double>& v, int n) {
  double peak = 0.0, edge = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double a = std::abs(v[static_cast<std::size_t>(i) * n + j]);
      peak = std::max(peak, a);
      if (i == 0 || j == 0 || i == n - 1 || j == n - 1) edge = std::max(edge, a);
    }
  if (edge > 1e-6 * peak) throw std::invalid_argument("oracle: field does not decay at the Cartesian boundary");
}

// Applies symbol(xi1, xi2) to the zero-padded field; returns the physical block.
template <class Symbol>
std::vector<double> apply_symbol(const std::vector<double>& v, const FftGrid& f, Symbol&& symbol) {
  const int m = f.m, mc = m / 2 + 1;
  double* in = fftw_alloc_real(static_cast<std::size_t>(m) * m);
  fftw_complex* spec = fftw_alloc_complex(static_cast<std::size_t>(m) * mc);
  fftw_plan fwd = fftw_plan_dft_r2c_2d(m, m, in, spec, FFTW_ESTIMATE);
  fftw_plan bwd = fftw_plan_dft_c2r_2d(m, m, spec, in, FFTW_ESTIMATE);
  std::fill(in, in + static_cast<std::size_t>(m) * m, 0.0);
  for (int i = 0; i < f.n; ++i)
    for (int j = 0; j < f.n; ++j) in[static_cast<std::size_t>(i) * m + j] = v[static_cast<std::size_t>(i) * f.n + j];
  fftw_execute(fwd);
  const double dk = 2.0 * M_PI / (m * f.dx);
  for (int i = 0; i < m; ++i) {
    const double k1 = dk * (i <= m / 2 ? i : i - m);
    for (int j = 0; j < mc; ++j) {
      const double k2 = dk * j;
      const std::complex<double> s = symbol(k1, k2, i == m / 2, j == m / 2);
      fftw_complex& c = spec[static_cast<std::size_t>(i) * mc + j];
      const std::complex<double> z = s * std::complex<double>(c[0], c[1]);
      c[0] = z.real();
      c[1] = z.imag();
    }
  }
  fftw_execute(bwd);
  const double norm = 1.0 / (static_cast<double>(m) * m);
  std::vector<double> out(static_cast<std::size_t>(f.n) * f.n);
  for (int i = 0; i < f.n; ++i)
    for (int j = 0; j < f.n; ++j) out[static_cast<std::size_t>(i) * f.n + j] = in[static_cast<std::size_t>(i) * m + j] * norm;
  fftw_destroy_plan(fwd);
  fftw_destroy_plan(bwd);
  fftw_free(in);
  fftw_free(spec);
  return out;
}

double cubic_interp(const std::vector<double>& c, const FftGrid& f, double x, double y) {
  const double px = (x + f.half) / f.dx - 0.5, py = (y + f.half) / f.dx - 0.5;
  const int ix = std::clamp(static_cast<int>(std::floor(px)) - 1, 0, f.n - 4);
  const int iy = std::clamp(static_cast<int>(std::floor(py)) - 1, 0, f.n - 4);
  auto lag = [](double t, double* w) {
    w[0] = -t * (t - 1) * (t - 2) / 6.0;
    w[1] = (t + 1) * (t - 1) * (t - 2) / 2.0;
    w[2] = -(t + 1) * t * (t - 2) / 2.0;
    w[3] = (t + 1) * t * (t - 1) / 6.0;
  };
  double wx[4], wy[4];
  lag(px - ix - 1, wx);
  lag(py - iy - 1, wy);
  double s = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) s += wx[a] * wy[b] * c[static_cast<std::size_t>(ix + a) * f.n + iy + b];
  return s;
}

}  // namespace

OracleResult flat_multiplier_oracle(const ScalarField& u, MultiplierOp op, const OracleCalibration* cal,
                                    int points_per_side) {
  const AnnularGrid& g = u.g();
  if (g.dim() != 2) throw std::invalid_argument("oracle: N = 2 only");
  const FftGrid f = make_fft_grid(g, points_per_side);
  OracleResult res;
  res.n = f.n;
  res.spacing = f.dx;
  res.valid_radius = f.half;
  res.field = ScalarField(u.grid());
  if (u.max_abs() == 0.0) {
    res.cartesian.assign(static_cast<std::size_t>(f.n) * f.n, 0.0);
    return res;
  }
  const std::vector<double> v = resample(u, f);
  check_boundary(v, f.n);

  // Pairs inside the box are closer than 2 * half * sqrt(2); the kernel is cut
  // at R = 2 * half so that no periodic image of the padded grid is seen by
  // targets within half of the origin when u is concentrated near it.
  const double R = 2.0 * f.half;
  const double kmax = std::sqrt(2.0) * M_PI / f.dx;
  const J0Integral F(R * kmax);
  // Truncated free-space multiplier of 1/|x|: (2 pi / |xi|) int_0^{R|xi|} J_0.
  auto m_trunc = [&](double k) { return k == 0.0 ? 2.0 * M_PI * R : 2.0 * M_PI / k * F(R * k); };

  const double i_scale = cal ? cal->i_scale : 1.0;
  const double r_scale = cal ? cal->r_scale : 1.0;
  const double cN = riesz_constant(2);
  std::vector<double> out;
  if (op == MultiplierOp::I) {
    out = apply_symbol(v, f, [&](double k1, double k2, bool, bool) {
      return std::complex<double>(i_scale * m_trunc(std::hypot(k1, k2)), 0.0);
    });
  } else {
    const int axis = op == MultiplierOp::R1 ? 0 : 1;
    // -i xi_k / |xi| times the same truncation factor |xi| m(xi) / (2 pi).
    out = apply_symbol(v, f, [&](double k1, double k2, bool n1, bool n2) {
      const double kk = axis == 0 ? k1 : k2;
      if ((axis == 0 && n1) || (axis == 1 && n2)) return std::complex<double>(0.0, 0.0);  // Nyquist
      return std::complex<double>(0.0, -r_scale * kk * cN * m_trunc(std::hypot(k1, k2)));
    });
  }
  res.cartesian = out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point x = g.node(i);
    if (std::hypot(x[0], x[1]) <= res.valid_radius) res.field[i] = cubic_interp(out, f, x[0], x[1]);
  }
  return res;
}

double oracle_riesz_square_error(const ScalarField& u, const OracleCalibration& cal, int points_per_side) {
  const FftGrid f = make_fft_grid(u.g(), points_per_side);
  const std::vector<double> v = resample(u, f);
  check_boundary(v, f.n);
  const double s2 = cal.r_scale * cal.r_scale;
  // sum_k (r_scale * -i xi_k/|xi|)^2 applied directly: the symbols compose.
  const std::vector<double> out = apply_symbol(v, f, [&](double k1, double k2, bool n1, bool n2) {
    const double k = std::hypot(k1, k2);
    if (k == 0.0) return std::complex<double>(-s2, 0.0);  // sum (xi_k/|xi|)^2 = 1 extended to xi = 0
    const double a = n1 ? 0.0 : k1 / k, b = n2 ? 0.0 : k2 / k;
    return std::complex<double>(-s2 * (a * a + b * b), 0.0);
  });
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    num += (out[i] + v[i]) * (out[i] + v[i]);
    den += v[i] * v[i];
  }
  return std::sqrt(num / den);
}

OracleCalibration calibrate_multiplier_oracle(const OperatorEngine& flat_engine, int points_per_side) {
  if (!flat_engine.surface().is_flat()) throw std::invalid_argument("calibrate_multiplier_oracle: flat engine");
  const GridPtr& g = flat_engine.grid_ptr();
  const ScalarField gauss = ScalarField::sample(g, [](const Point& x) { return std::exp(-(x[0] * x[0] + x[1] * x[1])); });
  const ScalarField qi = flat_engine.apply_all(Family::Riesz, gauss)[0];
  const ScalarField qr = flat_engine.apply_all(Family::RieszPV, gauss)[0];
  const OracleResult oi = flat_multiplier_oracle(gauss, MultiplierOp::I, nullptr, points_per_side);
  const OracleResult orr = flat_multiplier_oracle(gauss, MultiplierOp::R1, nullptr, points_per_side);
  auto fit = [&](const ScalarField& q, const OracleResult& o) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const Point x = g->node(i);
      if (std::hypot(x[0], x[1]) > o.valid_radius) continue;
      const double w = g->weight(i);
      num += w * q[i] * o.field[i];
      den += w * o.field[i] * o.field[i];
    }
    return num / den;
  };
  OracleCalibration cal;
  cal.i_scale = fit(qi, oi);
  cal.r_scale = fit(qr, orr);
  cal.r_convention = cal.r_scale >= 0.0 ? "-i xi_k/|xi|" : "+i xi_k/|xi|";
  return cal;
}

}  // namespace layerpot
