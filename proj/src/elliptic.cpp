#include "rbump/elliptic.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include <cmath>
#include <random>
#include <vector>

namespace rbump {

namespace {

void add_stencil(std::vector<Eigen::Triplet<double>>& triplets, int row, const Stencil& s,
                 double scale) {
  for (const StencilTerm& t : s)
    if (t.col >= 0) triplets.emplace_back(row, t.col, scale * t.w);
}

double relative_residual(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& b) {
  return (a * x - b).lpNorm<Eigen::Infinity>() / (b.lpNorm<Eigen::Infinity>() + 1.0);
}

}  // namespace

Eigen::SparseMatrix<double> assemble_frame_operator(const ChartedDomain& domain, const Grid& grid,
                                                    const FrameCoeffFn& coeffs) {
  const int n = grid.dimension();
  const int unknowns = grid.unknown_count();

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(unknowns) * (2 * n * n + 2 * n + 1));

  Eigen::MatrixXd a2(n, n);
  Eigen::VectorXd a1(n);
  for (int k = 0; k < unknowns; ++k) {
    double a0 = 0.0;
    a2.setZero();
    a1.setZero();
    coeffs(k, a2, a1, a0);

    const Eigen::VectorXd& x = grid.node(k).x;
    const double lambda = conformal_factor(x);
    const double inv_l2 = 1.0 / (lambda * lambda);
    const Eigen::VectorXd s = log_conformal_gradient(x);

    // Chart second-order coefficients: A2_ij / lambda^2.
    for (int i = 0; i < n; ++i) {
      add_stencil(triplets, k, stencil_d2(grid, k, i), a2(i, i) * inv_l2);
      for (int j = i + 1; j < n; ++j)
        add_stencil(triplets, k, stencil_dmixed(grid, k, i, j), 2.0 * a2(i, j) * inv_l2);
    }
    // Chart first-order coefficients: A1_k/lambda minus the Christoffel
    // contraction  sum_ij A2_ij Gamma^k_ij = 2 (A2 s)_k - s_k tr(A2).
    const Eigen::VectorXd a2s = a2 * s;
    const double tr = a2.trace();
    for (int kk = 0; kk < n; ++kk) {
      double c1 = a1(kk) / lambda - inv_l2 * (2.0 * a2s(kk) - s(kk) * tr);
      if (c1 != 0.0) add_stencil(triplets, k, stencil_d1(grid, k, kk), c1);
    }
    if (a0 != 0.0) triplets.emplace_back(k, k, a0);
  }

  Eigen::SparseMatrix<double> matrix(unknowns, unknowns);
  matrix.setFromTriplets(triplets.begin(), triplets.end());
  matrix.makeCompressed();
  return matrix;
}

LinearSystem assemble(const ScalarField& w, double t, const CurvatureSpec& spec,
                      const ChartedDomain& domain, const Grid& grid) {
  const int n = grid.dimension();
  const int unknowns = grid.unknown_count();
  if (w.size() != unknowns) throw EllipticError("field length does not match grid unknowns");
  if (!w.allFinite()) throw EllipticError("non-finite values in the frozen field w");

  LinearSystem sys;
  sys.rhs.resize(unknowns);
  sys.coeff_min = std::numeric_limits<double>::infinity();
  sys.coeff_max = -std::numeric_limits<double>::infinity();

  // Frame gradients once per node; reused by the coefficient callback and
  // the right-hand side.
  std::vector<Eigen::VectorXd> grads(static_cast<std::size_t>(unknowns));
  for (int k = 0; k < unknowns; ++k) grads[static_cast<std::size_t>(k)] = frame_gradient(grid, domain, k, w);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  sys.matrix = assemble_frame_operator(
      domain, grid, [&](int k, Eigen::MatrixXd& a2, Eigen::VectorXd& a1, double& a0) {
        const Eigen::VectorXd& g = grads[static_cast<std::size_t>(k)];
        const double gs = g.squaredNorm();
        a2 = (1.0 + gs) * Eigen::MatrixXd::Identity(n, n) - g * g.transpose();
        a1.setZero();
        a0 = 0.0;
        if (!a2.allFinite()) throw EllipticError("non-finite operator coefficients");

        eig.compute(a2, Eigen::EigenvaluesOnly);
        sys.coeff_min = std::min(sys.coeff_min, eig.eigenvalues().minCoeff());
        sys.coeff_max = std::max(sys.coeff_max, eig.eigenvalues().maxCoeff());
        sys.grad_sup_sq = std::max(sys.grad_sup_sq, gs);
      });

  if (sys.coeff_min < 1.0 - 1e-12)
    throw EllipticError("ellipticity lower bound violated: min eigenvalue " +
                        std::to_string(sys.coeff_min) + " (assembly bug)");

  for (int k = 0; k < unknowns; ++k) {
    const double gs = grads[static_cast<std::size_t>(k)].squaredNorm();
    const double wk = w(k);
    const double radius = std::exp(wk);
    const Eigen::VectorXd q = domain.to_sphere(grid.node(k).x);
    const double hval = spec.evaluate(q, radius);
    sys.rhs(k) = n * t * (1.0 + gs) * (1.0 - std::sqrt(1.0 + gs) * radius * hval);
  }
  if (!sys.rhs.allFinite()) throw EllipticError("non-finite right-hand side");
  return sys;
}

ScalarField solve(const LinearSystem& system, const SolveOptions& opts) {
  const auto& a = system.matrix;
  const auto& b = system.rhs;

  auto direct = [&]() -> ScalarField {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success)
      throw EllipticError("sparse factorization failed (discrete operator singular); "
                          "unknowns=" + std::to_string(a.rows()));
    ScalarField x = lu.solve(b);
    // A couple of refinement sweeps keep the algebraic residual at roundoff.
    for (int sweep = 0; sweep < 3 && relative_residual(a, x, b) > opts.residual_tol; ++sweep) {
      Eigen::VectorXd r = b - a * x;
      x += lu.solve(r);
    }
    return x;
  };

  ScalarField x;
  if (opts.method == LinearMethod::Krylov) {
    Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> krylov;
    krylov.setTolerance(1e-14);
    krylov.setMaxIterations(opts.krylov_max_iterations);
    krylov.compute(a);
    x = krylov.solve(b);
    if (krylov.info() != Eigen::Success || relative_residual(a, x, b) > opts.residual_tol) {
      // One restart from the current iterate, then the direct fallback.
      x = krylov.solveWithGuess(b, x);
      if (krylov.info() != Eigen::Success || relative_residual(a, x, b) > opts.residual_tol)
        x = direct();
    }
  } else {
    x = direct();
  }

  const double rel = relative_residual(a, x, b);
  if (!(rel <= opts.residual_tol))
    throw EllipticError("linear solve residual " + std::to_string(rel) + " above tolerance");
  return x;
}

EllipticityReport ellipticity_check(const ScalarField& w, const ChartedDomain& domain,
                                    const Grid& grid, int samples, std::uint64_t seed) {
  const int n = grid.dimension();
  EllipticityReport rep;
  rep.samples = samples;

  std::vector<Eigen::VectorXd> grads(static_cast<std::size_t>(grid.unknown_count()));
  for (int k = 0; k < grid.unknown_count(); ++k) {
    grads[static_cast<std::size_t>(k)] = frame_gradient(grid, domain, k, w);
    rep.grad_sup_sq = std::max(rep.grad_sup_sq, grads[static_cast<std::size_t>(k)].squaredNorm());
  }
  const double upper = 1.0 + 2.0 * rep.grad_sup_sq;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, grid.unknown_count() - 1);
  std::normal_distribution<double> gauss(0.0, 1.0);

  rep.lower_margin = std::numeric_limits<double>::infinity();
  rep.upper_margin = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    const int k = pick(rng);
    Eigen::VectorXd xi(n);
    do {
      for (int i = 0; i < n; ++i) xi(i) = gauss(rng);
    } while (xi.norm() < 1e-8);
    xi.normalize();

    const Eigen::VectorXd& g = grads[static_cast<std::size_t>(k)];
    const double gs = g.squaredNorm();
    const double quad = (1.0 + gs) * xi.squaredNorm() - std::pow(g.dot(xi), 2);

    Eigen::MatrixXd a2 = (1.0 + gs) * Eigen::MatrixXd::Identity(n, n) - g * g.transpose();
    const double quad_matrix = xi.dot(a2 * xi);
    rep.identity_error = std::max(rep.identity_error, std::abs(quad_matrix - quad));

    rep.lower_margin = std::min(rep.lower_margin, quad_matrix - xi.squaredNorm());
    rep.upper_margin = std::min(rep.upper_margin, upper * xi.squaredNorm() - quad_matrix);
  }
  rep.pass = rep.lower_margin >= -1e-12 && rep.upper_margin >= -1e-12 &&
             rep.identity_error <= 1e-12;
  return rep;
}

}  // namespace rbump
