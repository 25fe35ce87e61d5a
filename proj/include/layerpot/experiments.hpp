#pragma once

#include <string>
#include <vector>

#include "layerpot/solver.hpp"

namespace layerpot {

/// Fitted constants of the three regimes of the commutator gradient bound,
/// N_p(grad([S, eta] u + S Psi); r) against C (r + Lambda(r)) ||u||_X for
/// r < r0/2, C ||u||_X for r0/2 <= r <= 4 r0 and C r^{-N} ||u||_X beyond.
///
/// The `scaled_*` constants use the right-hand sides the proof actually
/// produces, with the r0 dependence written out: m = int_{|y|>r0} |u| |y|^{-N},
/// inner (r/r0 + Lambda(r)) m, middle (r/r0) int Q_{N,1}(rho/r) N_p(u; rho) + m,
/// outer r^{-N} (int_{|y|<2r0} |u| + r0^N m).
struct CommutatorRegimes {
  double inner = 0.0, middle = 0.0, outer = 0.0;
  double scaled_inner = 0.0, scaled_middle = 0.0, scaled_outer = 0.0;
  int inner_points = 0, middle_points = 0, outer_points = 0;
};

struct LocalEstimateReport {
  double r0 = 1.0;
  bool trivial = false;            // u and f vanish
  double moment_relative = 0.0;    // max_k |moment residual_k| / max_k |gamma_k|
  double w_match_relative = 0.0;   // sup_r N_p(w - eta u - Psi) / sup_r N_p(eta u + Psi)
  double u_xp_norm = 0.0;
  SolveReport w_solve;
  std::vector<double> radii;       // probe radii below r0
  std::vector<double> u_seminorms;
  std::vector<LocalBound> bounds;
  double fitted_C = 0.0;           // max N_p(u; r) / bound_local(r)
  CommutatorRegimes regimes;
};

/// u should solve S u = f near the origin. Builds the correction Psi, solves
/// S w = eta f + [S, eta] u + S Psi and compares w with eta u + Psi.
LocalEstimateReport local_estimate_experiment(const OperatorEngine& e, const ScalarField& u, const ScalarField& f,
                                              const VectorField& f_grad, double r0, const MajorantSpec& spec,
                                              const SolveConfig& cfg = {});

/// f = |x|^{1-alpha} times a cut-off that is 1 below r0/4 and 0 beyond 2 r0,
/// so that N_p(grad f; r) ~ r^{-alpha}; on the innermost octave f is frozen
/// at its value at 2 r_min.
CatalogF alpha_source(double alpha, double r0, double r_min);

struct AlphaDecayReport {
  double alpha = 0.0;
  double r0 = 1.0;
  double source_r0 = 8.0;
  double inner_slope = 0.0;       // d log N_p(u) / d log r, inner two probe octaves
  double slope_floor = 0.0;       // -alpha - 0.2
  bool slope_pass = false;
  double threshold_radius = 0.0;  // largest grid radius with Lambda(r) <= alpha / (2 c1)
  SolveReport solve;
  LocalEstimateReport local;
};

/// The source is cut off at source_r0 (well outside the inner probe octaves,
/// so the smooth far part of f does not bend the inner slope); the local
/// estimate uses r0.
AlphaDecayReport alpha_decay_experiment(const OperatorEngine& e, double alpha, const MajorantSpec& spec,
                                        double r0 = 1.0, double source_r0 = 8.0, const SolveConfig& cfg = {});

struct DiniReport {
  std::vector<double> radii;   // inner two probe octaves
  std::vector<double> values;  // N_p(u; r)
  double median = 0.0;
  double max_over_median = 0.0;
  double min_over_median = 0.0;
  bool bounded = false;        // every value within a factor 2 of the median
  SolveReport solve;
};

/// Summable-modulus case: solve with f from the catalog on a Dini surface and
/// check the inner octaves of N_p(u) stay within 2x of their median.
DiniReport dini_experiment(const OperatorEngine& e, const std::string& f_id, const MajorantSpec& spec,
                           const SolveConfig& cfg = {});

}  // namespace layerpot
