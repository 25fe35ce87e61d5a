#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "layerpot/geometry.hpp"
#include "layerpot/grid.hpp"

namespace layerpot {

struct OperatorConfig {
  double pv_epsilon_factor = 0.5;     // p.v. exclusion radius / local node spacing
  int pv_extrapolation_levels = 3;    // Richardson levels eps, eps/2, eps/4
  int near_singular_refinement = 4;   // radial Gauss panels on the local polar patch
  // The remaining knobs are not part of the documented interface but are
  // kept here so that refinement studies can vary them.
  double near_radius_factor = 0.7;    // local patch radius / |x|
  double window_flat = 0.05;          // partition of unity is exactly 1 below this fraction of the patch
  int near_angular_nodes = 48;        // even, so every direction has its antipode
  int panel_order = 8;
  int tail_order = 12;
  bool tail_correction = true;

  void validate() const;
};

/// c_N = Gamma((N+1)/2) pi^{-(N+1)/2}.
double riesz_constant(int N);

/// Kernel families. Riesz: |x-y|^{1-N}. SingleLayer: omega(y)|Phi x - Phi y|^{1-N}.
/// SurfacePV: the N+1 kernels omega(y)(Phi x - Phi y)_k |Phi x - Phi y|^{-N-1}.
/// RieszPV: the N flat kernels c_N (x-y)_k |x-y|^{-N-1}.
enum class Family { Riesz, SingleLayer, SurfacePV, RieszPV };

struct OpDiagnostics {
  bool pv_divergent = false;    // Richardson levels disagreed somewhere
  std::size_t pv_flagged = 0;   // number of flagged targets
  bool tail_divergent = false;  // extrapolated tail not integrable; tail skipped
  double tail_relative = 0.0;   // max |tail| / max |result|
  void merge(const OpDiagnostics& o);
};

/// Quadrature realisation of the integral operators on one grid and surface.
///
/// Each target value is split by a smooth partition of unity centred on the
/// target. The smooth far part is summed over all grid nodes; the part within
/// near_radius_factor * |x| is integrated on a local polar patch (Gauss panels
/// in the radius, paired antipodal angles) against a six-point log-polar
/// interpolant of the density. Principal values exclude discs of radius
/// eps, eps/2, ... and extrapolate in eps. Near-field rows are built lazily
/// and cached. Densities beyond the grid are modelled by a power law with the
/// boundary shell's angular profile and integrated by Gauss-Laguerre.
class OperatorEngine {
 public:
  OperatorEngine(GridPtr grid, LipschitzSurface surface, OperatorConfig cfg = {});
  ~OperatorEngine();
  OperatorEngine(const OperatorEngine&) = delete;
  OperatorEngine& operator=(const OperatorEngine&) = delete;

  const AnnularGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const LipschitzSurface& surface() const { return surface_; }
  const OperatorConfig& config() const { return cfg_; }
  int components(Family f) const;

  /// densities[c] is integrated against kernel component c.
  std::vector<ScalarField> apply(Family f, const std::vector<const ScalarField*>& densities,
                                 OpDiagnostics* diag = nullptr) const;
  /// One density against every component.
  std::vector<ScalarField> apply_all(Family f, const ScalarField& u, OpDiagnostics* diag = nullptr) const;

  /// Kernel component `comp` of family f at arbitrary points (|x| may be 0).
  std::vector<double> evaluate_at(Family f, int comp, const ScalarField& u, const std::vector<Point>& xs) const;

  /// Node values of psi.
  const ScalarField& psi() const { return psi_; }
  /// Node values of d_k phi.
  const ScalarField& grad_phi(int k) const { return grad_phi_[k]; }

 private:
  struct NearRows;
  struct NodeGeom;
  const NearRows& near_rows(Family f) const;
  void build_rows(Family f, NearRows& rows) const;
  void kernel(Family f, const Point& x, double phix, const Point& y, double phiy, double omegay, double* out) const;
  void add_tails(Family f, const std::vector<const ScalarField*>& dens, std::vector<ScalarField>& out,
                 OpDiagnostics& diag) const;

  GridPtr grid_;
  LipschitzSurface surface_;
  OperatorConfig cfg_;
  std::vector<double> phi_, omega_;
  ScalarField psi_;
  std::vector<ScalarField> grad_phi_;
  mutable std::mutex mu_;
  mutable std::unique_ptr<NearRows> rows_[4];
};

enum class PvKind { T, TN1, R, Rpsi };

// Free-function forms. Each builds a temporary engine; reuse an
// OperatorEngine when applying several operators on the same surface.
ScalarField riesz_potential(const ScalarField& u, bool weighted, const LipschitzSurface& surface,
                            const OperatorConfig& cfg = {}, OpDiagnostics* diag = nullptr);
ScalarField single_layer(const ScalarField& u, const LipschitzSurface& surface, const OperatorConfig& cfg = {},
                         OpDiagnostics* diag = nullptr);
/// k is 0-based and ignored for TN1.
ScalarField pv_transform(const ScalarField& u, PvKind kind, int k, const LipschitzSurface& surface,
                         const OperatorConfig& cfg = {}, OpDiagnostics* diag = nullptr);
VectorField single_layer_grad(const ScalarField& u, const LipschitzSurface& surface, const OperatorConfig& cfg = {},
                              OpDiagnostics* diag = nullptr);
/// R f = c_N/(N-1) sum_k R_k d_k f. Throws when f fails the Y membership check.
ScalarField r_solve(const ScalarField& f, const VectorField& f_grad, const OperatorConfig& cfg = {},
                    OpDiagnostics* diag = nullptr);

// Engine-based forms used by the solver.
ScalarField riesz_potential(const OperatorEngine& e, const ScalarField& u, bool weighted, OpDiagnostics* d = nullptr);
ScalarField single_layer(const OperatorEngine& e, const ScalarField& u, OpDiagnostics* d = nullptr);
VectorField single_layer_grad(const OperatorEngine& e, const ScalarField& u, OpDiagnostics* d = nullptr);
/// Sum_k R_k g_k with the flat kernels (no Y check).
ScalarField riesz_transform_sum(const OperatorEngine& e, const VectorField& g, OpDiagnostics* d = nullptr);
ScalarField r_solve(const OperatorEngine& e, const ScalarField& f, const VectorField& f_grad,
                    OpDiagnostics* d = nullptr);
/// d_k (I^psi - S) u = (N-1)((T_k - c_N^{-1} R^psi_k) u + d_k phi T_{N+1} u).
VectorField diff_operator_grad(const OperatorEngine& e, const ScalarField& u, OpDiagnostics* d = nullptr);

// ---------------------------------------------------------------------------
// Flat Fourier-multiplier oracle.

enum class MultiplierOp { I, R1, R2 };

struct OracleCalibration {
  double i_scale = 0.0;   // fitted constant C in C * m(xi) for I
  double r_scale = 0.0;   // fitted sign / scale for R_k
  std::string r_convention;
};

struct OracleResult {
  ScalarField field;      // on the annular grid; zero beyond valid_radius
  double valid_radius = 0.0;
  std::vector<double> cartesian;  // result on the Cartesian grid (row-major)
  int n = 0;              // Cartesian points per side
  double spacing = 0.0;
};

/// FFT on a uniform grid covering [-r_max/4, r_max/4]^2. I uses the
/// free-space multiplier of |x|^{-1} truncated beyond the box diagonal,
/// (1/|xi|) int_0^{L|xi|} J_0; R_k uses -i xi_k / |xi|. `cal` supplies the
/// frozen constants; without it the raw multipliers (scale 1) are used.
OracleResult flat_multiplier_oracle(const ScalarField& u, MultiplierOp op, const OracleCalibration* cal = nullptr,
                                    int points_per_side = 1024);
/// Sum_k R_k R_k u on the Cartesian grid, compared with -u there.
double oracle_riesz_square_error(const ScalarField& u, const OracleCalibration& cal, int points_per_side = 1024);
/// Least-squares fit of the constants against quadrature on the reference Gaussian exp(-|x|^2).
OracleCalibration calibrate_multiplier_oracle(const OperatorEngine& flat_engine, int points_per_side = 1024);

// ---------------------------------------------------------------------------
// Localisation correction.

struct CorrectionSpec {
  double r0 = 1.0;
  std::vector<double> gamma;        // moments gamma_i
  std::vector<double> beta;         // coefficients actually used in Psi
  ScalarField eta;                  // node values of the cut-off
  ScalarField psi_corr;             // Psi
  std::vector<double> moment_residual;  // int Psi y_k |y|^{-N-1} omega dy + gamma_k
  double chi_integral = 0.0;        // int chi d rho / rho
};

double cutoff_eta(double rho, double r0);
double cutoff_eta_deriv(double rho, double r0);
double bump_chi(double rho, double r0);
/// Normalisation making int chi d rho / rho = N / |S^{N-1}|.
double chi_normalisation(int N);

CorrectionSpec commutator_correction(const ScalarField& u, const LipschitzSurface& surface, double r0);
/// [S, eta] u + S Psi.
ScalarField commutator_field(const OperatorEngine& e, const ScalarField& u, const CorrectionSpec& spec,
                             OpDiagnostics* d = nullptr);
/// Gradient of [S, eta] u + S Psi, assembled from single_layer_grad.
VectorField commutator_field_grad(const OperatorEngine& e, const ScalarField& u, const CorrectionSpec& spec,
                                  OpDiagnostics* d = nullptr);

// ---------------------------------------------------------------------------

struct OperatorNormReport {
  struct Row {
    double eps = 0.0;
    double lambda = 0.0;
    double diff_ratio = 0.0;  // max ||(T_k - c_N^{-1} R^psi_k) u|| / ||u||
    double tn1_ratio = 0.0;   // max ||T_{N+1} u|| / ||u||
  };
  std::vector<Row> rows;
  double diff_exponent = 0.0;
  double tn1_exponent = 0.0;
};

/// Ratios on random smooth fields supported in B(0, 2r), in L^p(B(0, 2r)).
/// `surface_family` is "tilt", "cone" or "wave"; one row per amplitude.
OperatorNormReport empirical_operator_norms(const GridPtr& grid, const std::string& surface_family, double r,
                                            int n_trials, const std::vector<double>& eps_list,
                                            std::uint64_t seed, double p = 2.0, const OperatorConfig& cfg = {});

double lp_norm_ball(const ScalarField& u, double radius, double p = 2.0);

}  // namespace layerpot
