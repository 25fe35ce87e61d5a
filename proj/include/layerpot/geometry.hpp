#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace layerpot {

/// A point of R^N for N <= 3. Components past the dimension are zero.
using Point = std::array<double, 3>;

double norm(const Point& x, int dim);
double distance(const Point& x, const Point& y, int dim);

enum class SurfaceKind { Flat, Tilt, Cone, Wave, Dini, Custom };

struct SurfaceValue {
  double phi = 0.0;
  Point grad{};
  double omega = 1.0;
  std::array<double, 4> Phi{};  // (y, phi(y)) in R^{N+1}
};

/// Graph surface x -> (x, phi(x)) with phi(0) = 0 and an increasing local
/// Lipschitz modulus Lambda(r), the Lipschitz constant of phi on |x| <= 2r.
class LipschitzSurface {
 public:
  using ScalarFn = std::function<double(const Point&)>;
  using GradFn = std::function<Point(const Point&)>;

  static LipschitzSurface flat(int dim = 2);
  static LipschitzSurface tilt(double eps, int dim = 2);
  static LipschitzSurface cone(double eps, int dim = 2);
  static LipschitzSurface wave(double eps, int dim = 2);
  static LipschitzSurface dini(double eps, int dim = 2);
  /// Arbitrary surface; Lambda is tabulated numerically.
  static LipschitzSurface custom(std::string id, int dim, ScalarFn phi, GradFn grad);
  /// Parses `flat`, `tilt:EPS`, `cone:EPS`, `wave:EPS`, `dini:EPS`.
  static LipschitzSurface from_id(const std::string& id, int dim = 2);

  const std::string& id() const { return id_; }
  int dim() const { return dim_; }
  SurfaceKind kind() const { return kind_; }
  double eps() const { return eps_; }
  bool is_flat() const { return kind_ == SurfaceKind::Flat; }

  double phi(const Point& x) const;
  Point grad(const Point& x) const;
  double lambda0() const { return lambda0_; }
  /// Lambda(r); closed form when known, else log-linear table interpolation.
  double lip(double r) const;

  const std::vector<double>& lip_radii() const { return lip_r_; }
  const std::vector<double>& lip_values() const { return lip_v_; }

 private:
  LipschitzSurface(std::string id, int dim, SurfaceKind kind, double eps);
  void build_lip_table();
  double closed_form_lip(double r) const;
  bool has_closed_form() const { return kind_ != SurfaceKind::Wave && kind_ != SurfaceKind::Custom; }

  std::string id_;
  int dim_ = 2;
  SurfaceKind kind_ = SurfaceKind::Flat;
  double eps_ = 0.0;
  ScalarFn custom_phi_;
  GradFn custom_grad_;
  std::vector<double> lip_r_;
  std::vector<double> lip_v_;
  double lambda0_ = 0.0;
};

double lip_modulus(const LipschitzSurface& s, double r);
SurfaceValue surface_eval(const LipschitzSurface& s, const Point& y);
double psi_weight(const LipschitzSurface& s, const Point& y);

struct Quotients {
  double lx = 0.0, ly = 0.0, lxy = 0.0;
};
Quotients l_quotients(const LipschitzSurface& s, const Point& x, const Point& y);

/// a(x,y) = (L_xy^2 - L_y^2) / (1 + L_y^2).
double a_value(const Quotients& q);

/// G(x,y) = psi(y)|x-y|^{1-N} - omega(y)|Phi(x)-Phi(y)|^{1-N}, the kernel of I^psi - S.
double diff_kernel(const LipschitzSurface& s, const Point& x, const Point& y);

/// d/dx_k G(x,y), k in [0, N). Throws DegenerateConfiguration when 1 + a <= 1e-12.
double diff_kernel_grad(const LipschitzSurface& s, const Point& x, const Point& y, int k);

struct DegenerateConfiguration : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct KernelSample {
  Point x{}, y{};
  double lx = 0.0, ly = 0.0, lxy = 0.0;
  double g_value = 0.0;
  Point g_grad{};
  double a_value = 0.0;
};

KernelSample kernel_sample(const LipschitzSurface& s, const Point& x, const Point& y);

struct BoundLine {
  std::string name;
  std::int64_t points = 0;
  double max_ratio = 0.0;
  bool finite = true;
};

struct BoundReport {
  std::vector<BoundLine> lines;
  std::int64_t skipped = 0;
  const BoundLine& line(const std::string& name) const;
};

/// Samples pairs across |x|/|y| in [1/64, 64] and reports, for each pointwise
/// quotient and kernel inequality, the largest left/right ratio. The quotient
/// bound is tested in both regime labelings (|x| vs 2|y| and |y| vs 2|x|).
BoundReport verify_kernel_bounds(const LipschitzSurface& s, int n_samples, std::uint64_t seed);

}  // namespace layerpot
