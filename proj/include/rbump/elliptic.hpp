#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <functional>

#include "rbump/curvature.hpp"
#include "rbump/geometry.hpp"

namespace rbump {

struct EllipticError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class LinearMethod { Direct, Krylov };

struct LinearSystem {
  Eigen::SparseMatrix<double> matrix;
  Eigen::VectorXd rhs;
  double coeff_min = 0.0;  // sampled eigenvalue bounds of a^ij over nodes
  double coeff_max = 0.0;
  double grad_sup_sq = 0.0;  // sup over nodes of |grad w|^2 (frame norm)
};

/// Per-node frame coefficients of a linear operator
///   sum_ij A2_ij u_ij + sum_k A1_k u_k + A0 u
/// (orthonormal-frame derivatives); the assembly expands them into chart
/// partial derivatives through the conformal Christoffel symbols and
/// discretizes with the grid stencils.
using FrameCoeffFn =
    std::function<void(int node, Eigen::MatrixXd& a2, Eigen::VectorXd& a1, double& a0)>;

Eigen::SparseMatrix<double> assemble_frame_operator(const ChartedDomain& domain, const Grid& grid,
                                                    const FrameCoeffFn& coeffs);

/// Frozen-coefficient operator of the fixed-point map:
///   L_w u = ((1+|grad w|^2) delta_ij - w_i w_j) u_ij
///   rhs   = n t (1+|grad w|^2)(1 - sqrt(1+|grad w|^2) e^w H(e^w q))
/// with homogeneous Dirichlet data (boundary values are zero, so nothing
/// moves to the right-hand side).
LinearSystem assemble(const ScalarField& w, double t, const CurvatureSpec& spec,
                      const ChartedDomain& domain, const Grid& grid);

struct SolveOptions {
  LinearMethod method = LinearMethod::Direct;
  double residual_tol = 1e-12;  // relative: |Au-b|_inf / (|b|_inf + 1)
  int krylov_max_iterations = 4000;
};

/// Solves the assembled system; direct sparse factorization by default,
/// BiCGSTAB with incomplete-LU preconditioning otherwise (falling back to
/// the factorization when the iteration stagnates).
ScalarField solve(const LinearSystem& system, const SolveOptions& opts = {});

struct EllipticityReport {
  double lower_margin = 0.0;    // min over samples of a^ij xi_i xi_j - |xi|^2
  double upper_margin = 0.0;    // min of (1 + 2 sup|grad w|^2)|xi|^2 - a^ij xi_i xi_j
  double identity_error = 0.0;  // max |a^ij xi_i xi_j - ((1+|g|^2)|xi|^2 - <g,xi>^2)|
  double grad_sup_sq = 0.0;
  int samples = 0;
  bool pass = false;
};

/// Random (node, direction) probes of the uniform ellipticity bounds and of
/// the exact quadratic-form identity.
EllipticityReport ellipticity_check(const ScalarField& w, const ChartedDomain& domain,
                                    const Grid& grid, int samples, std::uint64_t seed = 2024);

}  // namespace rbump
