#include <cmath>
#include <random>
#include <stdexcept>

#include "layerpot/operators.hpp"

namespace layerpot {

double lp_norm_ball(const ScalarField& u, double radius, double p) {
  const AnnularGrid& g = u.g();
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.radius(g.shell_of(i)) >= radius) continue;
    s += g.weight(i) * std::pow(std::abs(u[i]), p);
  }
  return std::pow(s, 1.0 / p);
}

namespace {

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

}  // namespace

OperatorNormReport empirical_operator_norms(const GridPtr& grid, const std::string& surface_family, double r,
                                            int n_trials, const std::vector<double>& eps_list, std::uint64_t seed,
                                            double p, const OperatorConfig& cfg) {
  if (n_trials < 1) throw std::invalid_argument("empirical_operator_norms: n_trials >= 1");
  if (!(r > 0.0)) throw std::invalid_argument("empirical_operator_norms: r > 0");
  // Random smooth fields: a few Gaussian bumps centred in B(0, r), cut off at 2r.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<ScalarField> trials;
  for (int t = 0; t < n_trials; ++t) {
    std::vector<std::array<double, 3>> bumps;  // cx, cy, amplitude
    for (int m = 0; m < 4; ++m) {
      double cx, cy;
      do {
        cx = U(rng);
        cy = U(rng);
      } while (cx * cx + cy * cy > 1.0);
      bumps.push_back({cx * r, cy * r, U(rng)});
    }
    const double s2 = 0.25 * r * r;
    trials.push_back(ScalarField::sample(grid, [bumps, r, s2](const Point& x) {
      double v = 0.0;
      for (const auto& b : bumps) {
        const double dx = x[0] - b[0], dy = x[1] - b[1];
        v += b[2] * std::exp(-(dx * dx + dy * dy) / (2.0 * s2));
      }
      return v * cutoff_eta(std::hypot(x[0], x[1]), r);
    }));
  }

  OperatorNormReport rep;
  const double inv_cN = 1.0 / riesz_constant(2);
  for (double eps : eps_list) {
    const LipschitzSurface s = LipschitzSurface::from_id(surface_family + ":" + std::to_string(eps), grid->dim());
    OperatorEngine e(grid, s, cfg);
    OperatorNormReport::Row row;
    row.eps = eps;
    row.lambda = s.lip(r);
    for (const ScalarField& u : trials) {
      const double un = lp_norm_ball(u, 2.0 * r, p);
      const std::vector<ScalarField> t = e.apply_all(Family::SurfacePV, u);
      const std::vector<ScalarField> rp = e.apply_all(Family::RieszPV, hadamard(e.psi(), u));
      for (int k = 0; k < 2; ++k) {
        const ScalarField diff = t[k] - inv_cN * rp[k];
        row.diff_ratio = std::max(row.diff_ratio, lp_norm_ball(diff, r, p) / un);
      }
      row.tn1_ratio = std::max(row.tn1_ratio, lp_norm_ball(t[2], r, p) / un);
    }
    rep.rows.push_back(row);
  }
  std::vector<double> lam, dr, tr;
  for (const auto& row : rep.rows) {
    lam.push_back(row.lambda);
    dr.push_back(row.diff_ratio);
    tr.push_back(row.tn1_ratio);
  }
  if (rep.rows.size() >= 2) {
    rep.diff_exponent = slope(lam, dr);
    rep.tn1_exponent = slope(lam, tr);
  }
  return rep;
}

}  // namespace layerpot
