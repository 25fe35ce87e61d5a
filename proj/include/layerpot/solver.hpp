#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "layerpot/catalog.hpp"
#include "layerpot/majorant.hpp"
#include "layerpot/operators.hpp"

namespace layerpot {

/// K(u) = psi^{-1} R((I^psi - S) u + f). On the flat surface I^psi = S and
/// the u-dependent part is skipped, so K(u) = R f exactly.
ScalarField apply_K(const OperatorEngine& e, const ScalarField& u, const ScalarField& f, const VectorField& f_grad,
                    OpDiagnostics* d = nullptr);

/// Seminorms on the grid-aligned dyadic radii, as a profile in t = -log r.
LogProfile log_seminorms(const ScalarField& u, double p = 2.0);
/// The norm of the fixed-point space: int int E_1 N_p(u) (see domain_integral).
/// A flat spec has E = 0; the norm then uses the constant Lambda*.
double b_norm(const MajorantSpec& spec, const ScalarField& u, double p = 2.0);

struct SolveConfig {
  double tol = 1e-8;           // B-norm step tolerance, relative to 1 + ||u_n||_B
  int max_iter = 60;
  double residual_tol = 1e-2;  // relative residual required at every probe radius
  double p = 2.0;
};

enum class Verdict { Converged, Stalled, Diverged };
std::string verdict_name(Verdict v);

struct IterationRecord {
  int n = 0;
  double b_step = 0.0;        // ||u_n - u_{n-1}||_B
  double residual_sup = 0.0;  // sup over probe radii of N_p(S u_n - f) / N_p(f)
  double contraction = 0.0;   // b_step_n / b_step_{n-1}; 0 for n = 1
};

struct SolveReport {
  int iterations = 0;  // first n with ||u_{n+1} - u_n||_B <= tol (1 + ||u_n||_B)
  std::vector<SeminormProfile> residual_profiles;  // S u_n - f, one per iterate
  SeminormProfile solution_seminorms;
  std::vector<double> probe_radii;
  std::vector<double> residual_relative;  // final iterate, per probe radius
  std::vector<double> solution_probe;     // N_p(u; r) per probe radius
  std::vector<double> bound_probe;        // bound_global(r) per probe radius
  std::vector<double> bound_margins;      // N_p(u; r) / bound_global(r)
  double fitted_C = 0.0;                  // max of bound_margins
  std::vector<double> contraction_estimates;
  std::vector<IterationRecord> records;
  bool monotone_residual = true;  // residual sup nonincreasing (to 1%) from iteration 2 on
  Verdict verdict = Verdict::Stalled;
  OpDiagnostics diag;
  std::string note;

  double max_contraction() const;
  double final_residual_sup() const;
};

struct SolveResult {
  ScalarField u;
  SolveReport report;
};

/// u_0 = 0, u_{n+1} = K(u_n). Throws std::invalid_argument when f fails the
/// Y membership check for spec.M.
SolveResult picard_solve(const OperatorEngine& e, const ScalarField& f, const VectorField& f_grad,
                         const MajorantSpec& spec, const SolveConfig& cfg = {});

/// N_p(S u - f; r) on the dyadic radii.
SeminormProfile residual_profile(const OperatorEngine& e, const ScalarField& u, const ScalarField& f,
                                 double p = 2.0);

struct DecayReport {
  double outer_slope = 0.0;           // d log N_p(u) / d log r over the outer probe octaves
  double outer_ceiling_slope = 0.0;   // the same for exp(-c1 int_1^r Lambda)
  double inner_slope = 0.0;           // over the inner probe octaves
  double inner_ceiling_slope = 0.0;   // -M
  double outer_margin = 0.0;          // ceiling slope - slope
  double inner_margin = 0.0;          // slope - ceiling slope
  bool outer_pass = true, inner_pass = true;
  bool small_o_outer = true, small_o_inner = true;  // N_p / Sigma^-(t, 0) decreasing at both ends
  bool trivial = false;                              // u vanishes
  bool pass() const { return outer_pass && inner_pass && small_o_outer && small_o_inner; }
};

/// Slope tolerance 0.05 on both ceilings; the ratio test allows 5% growth.
DecayReport decay_check(const SeminormProfile& u_seminorms, const MajorantSpec& spec, const AnnularGrid& g);

struct CKEstimate {
  double C_R = 0.0;         // N_p(R f; r) / int Q_{N,0}(rho/r) N_p(grad f; rho)
  double C_E = 0.0;         // N_p(grad (I^psi - S) u; r) / int E_r(rho) N_p(u; rho); 0 on flat
  double psi_inv_sup = 1.0;
  double C_K = 0.0;         // 2 C_R sup psi^{-1} max(C_E, 1)
};

/// Ratios at the probe radii over the catalog f and n_random bump fields.
CKEstimate estimate_C_K(const OperatorEngine& e, const MajorantSpec& spec, int n_random, std::uint64_t seed,
                        double p = 2.0);

}  // namespace layerpot
