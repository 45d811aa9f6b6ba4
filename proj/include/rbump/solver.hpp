#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rbump/curvature.hpp"
#include "rbump/elliptic.hpp"
#include "rbump/geometry.hpp"

namespace rbump {

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Scheme { Picard, Newton, PicardThenNewton };
enum class SolveStatus { Converged, MaxIter, Diverged, HypothesisFail };

std::string to_string(SolveStatus s);
std::string to_string(Scheme s);

struct SolverConfig {
  Scheme scheme = Scheme::PicardThenNewton;
  std::vector<double> t_schedule{0.25, 0.5, 0.75, 1.0};
  std::vector<double> eps_schedule{0.1, 0.01, 0.0};
  double tol_residual = 1e-9;
  double tol_increment = 1e-11;
  int max_iterations = 200;
  double newton_initial_step = 1.0;
  double newton_backtrack = 0.5;
  LinearMethod linear_method = LinearMethod::Direct;
  bool force = false;  // solve even when the weak hypotheses fail
  int hypothesis_q_samples = 2000;
  int hypothesis_rho_samples = 200;

  void validate() const;
};

struct StageRecord {
  double eps = 0.0;
  double t = 1.0;
  int iterations = 0;
  std::vector<double> residuals;  // sup norm per iteration (before each step)
  double wall_seconds = 0.0;
};

struct C0Bounds {
  double u_min = 0.0, u_max = 0.0;
  double lo = 0.0, hi = 0.0;  // log r1, log r2
  double tol = 0.0;
  bool pass = false;
};

struct SolveReport {
  SolveStatus status = SolveStatus::Converged;
  std::vector<StageRecord> stages;
  double final_residual = 0.0;
  C0Bounds c0;
  double grad_sup_sq = 0.0;
  bool iterates_in_bounds = true;
  double total_seconds = 0.0;
  int unknowns = 0;
  HypothesisReport hypotheses;
};

/// Node-wise residual of the prescribed-curvature equation at homotopy stage t:
///   F_t(u) = ((1+|grad u|^2) d_ij - u_i u_j) u_ij
///            - n t (1+|grad u|^2)(1 - sqrt(1+|grad u|^2) e^u H(e^u q)).
ScalarField residual(const ScalarField& u, const CurvatureSpec& spec, const ChartedDomain& domain,
                     const Grid& grid, double t = 1.0);

/// One application of the fixed-point map: u = T_t w via assemble + solve.
ScalarField picard_step(const ScalarField& w, double t, const CurvatureSpec& spec,
                        const ChartedDomain& domain, const Grid& grid,
                        LinearMethod method = LinearMethod::Direct);

/// One damped Newton step on F_t, backtracking on sup-norm growth of the
/// residual; falls back to a Picard sweep if the linearization is singular.
ScalarField newton_step(const ScalarField& u, double t, const CurvatureSpec& spec,
                        const ChartedDomain& domain, const Grid& grid,
                        double initial_step = 1.0, double backtrack = 0.5,
                        LinearMethod method = LinearMethod::Direct);

/// Assembled linearization of F_t at u (the full Jacobian, boundary rows
/// excluded by construction); exposed for consistency checks.
Eigen::SparseMatrix<double> newton_jacobian(const ScalarField& u, double t,
                                            const CurvatureSpec& spec,
                                            const ChartedDomain& domain, const Grid& grid);

C0Bounds check_c0_bounds(const ScalarField& u, const CurvatureSpec& spec, double grid_spacing);

/// Homotopy-driven solve: outer loop over the eps schedule (each stage
/// warm-starts the next), inner loop over the t schedule, Picard and/or
/// Newton iterations per stage.
std::pair<ScalarField, SolveReport> solve_bump(const ChartedDomain& domain,
                                               const CurvatureSpec& spec,
                                               const SolverConfig& config,
                                               const std::optional<ScalarField>& initial = {});

struct ProbeRun {
  std::string label;
  SolveStatus status = SolveStatus::Converged;
  bool in_A = false;
  double u_min = 0.0, u_max = 0.0;
  double final_residual = 0.0;
  ScalarField u;
};

struct ProbeReport {
  std::vector<ProbeRun> runs;
  /// Clusters of converged solutions under the agreement threshold; each
  /// entry lists run indices, flagged by whether the cluster lies in A.
  std::vector<std::vector<int>> clusters;
  std::vector<bool> cluster_in_A;
  double max_pairwise_in_A = 0.0;  // sup distance among converged in-A runs
  double agreement_threshold = 1e-6;
  std::uint64_t seed = 0;
  int converged_count = 0;
};

/// Multi-start consistency probe of uniqueness within the annulus A:
/// u0 = 0, constants in (log r1, log r2), and seeded random smooth fields
/// clipped to the bounds.
ProbeReport uniqueness_probe(const ChartedDomain& domain, const CurvatureSpec& spec,
                             const SolverConfig& config, int n_starts, std::uint64_t seed);

}  // namespace rbump
