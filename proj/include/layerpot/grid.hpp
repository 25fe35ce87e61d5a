#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "layerpot/geometry.hpp"

namespace layerpot {

/// Log-radial x angular grid on r_min <= |x| <= r_max.
///
/// Shell j covers the log-cell [r_min 2^{j/J}, r_min 2^{(j+1)/J}) and its
/// nodes sit at the geometric cell centre rho_j = r_min 2^{(j+1/2)/J}, so a
/// grid-aligned annulus [r, 2r) holds exactly J shells. Weights are the
/// midpoint rule in log rho times the angular rule: rho_j^N (ln 2 / J) w_a.
/// N = 2 uses the trapezoid rule on the circle with A nodes; N = 3 the product
/// of A azimuthal trapezoid nodes and A/2 Gauss-Legendre nodes in cos(theta).
class AnnularGrid {
 public:
  AnnularGrid(int dim = 2, double r_min = 1.0 / 256.0, double r_max = 256.0, int radial_per_octave = 8,
              int angular_count = 64);

  int dim() const { return dim_; }
  double r_min() const { return r_min_; }
  double r_max() const { return r_max_; }
  int radial_per_octave() const { return J_; }
  int angular_count() const { return A_; }

  int n_radial() const { return n_r_; }
  int n_angular() const { return static_cast<int>(dirs_.size()); }
  std::size_t size() const { return static_cast<std::size_t>(n_r_) * dirs_.size(); }
  std::size_t index(int j, int a) const { return static_cast<std::size_t>(j) * dirs_.size() + a; }
  int shell_of(std::size_t i) const { return static_cast<int>(i / dirs_.size()); }
  int angle_of(std::size_t i) const { return static_cast<int>(i % dirs_.size()); }

  /// Log step ln 2 / J.
  double h() const { return h_; }
  double radius(int j) const { return radii_[j]; }
  double log_radius(int j) const { return std::log(r_min_) + (j + 0.5) * h_; }
  /// Unit direction of angular node a; theta is the azimuth.
  const Point& direction(int a) const { return dirs_[a]; }
  double theta(int a) const { return theta_[a]; }
  double angular_weight(int a) const { return ang_w_[a]; }
  double angular_total() const;

  Point node(std::size_t i) const;
  double weight(std::size_t i) const { return shell_w_[shell_of(i)] * ang_w_[angle_of(i)]; }
  /// rho_j^N ln 2 / J.
  double shell_weight(int j) const { return shell_w_[j]; }

  /// Grid-aligned radii r = r_min 2^{k/J} with [r, 2r) inside the grid.
  std::vector<double> dyadic_radii() const;
  /// Octave midpoints r with 4 r_min <= r and 2r <= r_max / 4.
  std::vector<double> probe_radii() const;

  bool operator==(const AnnularGrid& o) const;

 private:
  int dim_, J_, A_, n_r_;
  double r_min_, r_max_, h_;
  std::vector<double> radii_;
  std::vector<double> shell_w_;
  std::vector<Point> dirs_;
  std::vector<double> theta_;
  std::vector<double> ang_w_;
};

using GridPtr = std::shared_ptr<const AnnularGrid>;
GridPtr make_grid(int dim = 2, double r_min = 1.0 / 256.0, double r_max = 256.0, int J = 8, int A = 64);

/// Real samples at every grid node, optionally remembering the analytic
/// function they came from.
class ScalarField {
 public:
  using Fn = std::function<double(const Point&)>;

  ScalarField() = default;
  explicit ScalarField(GridPtr grid);
  ScalarField(GridPtr grid, std::vector<double> values);
  static ScalarField sample(GridPtr grid, Fn fn);

  const GridPtr& grid() const { return grid_; }
  const AnnularGrid& g() const { return *grid_; }
  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  const Fn& source() const { return source_; }
  bool has_source() const { return static_cast<bool>(source_); }

  double max_abs() const;
  bool all_finite() const;

  ScalarField& operator+=(const ScalarField& o);
  ScalarField& operator-=(const ScalarField& o);
  ScalarField& operator*=(double s);

 private:
  GridPtr grid_;
  std::vector<double> values_;
  Fn source_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double s, ScalarField a);
/// Pointwise product.
ScalarField hadamard(const ScalarField& a, const ScalarField& b);
/// Pointwise |v| of a vector field.
ScalarField magnitude(const std::vector<ScalarField>& v);

using VectorField = std::vector<ScalarField>;

struct SeminormProfile {
  double p = 2.0;
  std::vector<double> radii;
  std::vector<double> values;
  double at(double r) const;
  double sup() const;
};

double seminorm(const ScalarField& u, double r, double p = 2.0);
SeminormProfile seminorm_profile(const ScalarField& u, double p = 2.0);
SeminormProfile seminorm_profile(const ScalarField& u, const std::vector<double>& radii, double p = 2.0);

double q_weight(double m, double n, double t);

/// A truncated improper integral over rho with its tail estimate.
struct NormValue {
  double value = 0.0;       // integral over [r_min, r_max/2]
  double tail = 0.0;        // geometric continuation beyond both ends
  bool diverged = false;    // an end octave adds more than 1% of the total
  double total() const { return value + tail; }
};

/// Integral of Q_{m,n}(rho) * profile(rho) d rho / rho on the profile's log grid.
NormValue weighted_profile_integral(const SeminormProfile& prof, double m, double n);
NormValue xp_norm(const ScalarField& u, double p = 2.0);
NormValue y_norm(const VectorField& f_grad, double M, double p = 2.0);

double radial_mean(const ScalarField& f, double r);

struct YMembership {
  NormValue norm;
  double mean_at_rmax = 0.0;
  double peak = 0.0;
  bool member = false;
};
YMembership y_membership(const ScalarField& f, const VectorField& f_grad, double M, double p = 2.0);

/// Fourth-order centred differences in (log rho, theta); one-sided at the
/// radial ends. N = 2 only.
VectorField gradient_fd(const ScalarField& f);

void write_field_csv(const std::string& path, const ScalarField& f);
void write_profile_csv(const std::string& path, const SeminormProfile& prof);

}  // namespace layerpot
