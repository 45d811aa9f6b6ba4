#include <doctest.h>

#include <cmath>

#include "rbump/solver.hpp"

using namespace rbump;

namespace {

Eigen::VectorXd vec3(double a, double b, double c) {
  Eigen::VectorXd v(3);
  v << a, b, c;
  return v;
}

ChartedDomain cap_domain(double theta0, double h) {
  return ChartedDomain::cap(2, vec3(0, 0, 1), theta0, h);
}

CurvatureSpec inverse_radius() { return CurvatureSpec::radial_power(1.0, 1.0, 0.5, 2.0); }
CurvatureSpec inverse_square() { return CurvatureSpec::radial_power(1.0, 2.0, 0.5, 2.0); }
CurvatureSpec unit_constant() { return CurvatureSpec::constant(1.0, 1.0, 1.0); }

// H = 1.3 |X|^-2: admissible on [1/2, 2] and genuinely nonconstant on the
// unit sphere (every pure power c = 1 has the trivial zero solution).
CurvatureSpec scaled_inverse_square() { return CurvatureSpec::radial_power(1.3, 2.0, 0.5, 2.0); }

// u(theta) = log(2 cos theta): the reflected spherical cap for H == 1 on the
// cap of geodesic radius pi/3. Sampled on the grid through the colatitude.
ScalarField reflected_cap_field(const ChartedDomain& dom, const Grid& grid) {
  ScalarField u(grid.unknown_count());
  for (int k = 0; k < grid.unknown_count(); ++k)
    u(k) = std::log(2.0 * std::cos(dom.cap_colatitude(grid.node(k).x)));
  return u;
}

SolverConfig direct_newton() {
  SolverConfig cfg;
  cfg.scheme = Scheme::Newton;
  cfg.t_schedule = {1.0};
  cfg.eps_schedule = {};
  return cfg;
}

}  // namespace

TEST_CASE("closed form log(2 cos theta) satisfies the reduced equation symbolically") {
  // Verifies the analytic oracle before it is used anywhere: with
  // u' = -tan(theta), 1 + u'^2 = sec^2, e^u = 2 cos(theta), both sides of
  //   u'' + (1+u'^2) cot(theta) u' = 2 (1+u'^2)(1 - sqrt(1+u'^2) e^u)
  // equal -2 sec^2(theta).
  for (int i = 1; i <= 60; ++i) {
    const double theta = i * (M_PI / 3) / 61.0;
    const double du = -std::tan(theta);
    const double ddu = -1.0 / std::pow(std::cos(theta), 2);
    const double one_v = 1.0 + du * du;
    const double lhs = ddu + one_v * (std::cos(theta) / std::sin(theta)) * du;
    const double rhs =
        2.0 * one_v * (1.0 - std::sqrt(one_v) * 2.0 * std::cos(theta) * 1.0);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    CHECK(lhs == doctest::Approx(-2.0 * one_v).epsilon(1e-12));
  }
}

TEST_CASE("residual vanishes on exact solutions") {
  ChartedDomain dom = cap_domain(75.0 * M_PI / 180.0, 0.08);
  Grid grid = build_grid(dom);
  ScalarField zero = ScalarField::Zero(grid.unknown_count());

  // H = |X|^-1, u = 0: both sides vanish identically.
  CHECK(residual(zero, inverse_radius(), dom, grid).lpNorm<Eigen::Infinity>() < 1e-14);
  // H == 1, u = 0: the domain itself is the solution surface.
  CHECK(residual(zero, unit_constant(), dom, grid).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("residual of the analytic reflected cap is O(h^2) at centered nodes") {
  // The truncation constant grows toward the rim, so the clean order shows
  // on a fixed compact core; the full set still meets the absolute bound.
  std::vector<double> spacings{0.08, 0.04};
  std::vector<double> sups, sups_core;
  for (double h : spacings) {
    ChartedDomain dom = cap_domain(M_PI / 3, h);
    Grid grid = build_grid(dom);
    const double core = 0.8 * dom.cap_chart_ball_radius();
    ScalarField u = reflected_cap_field(dom, grid);
    ScalarField f = residual(u, unit_constant(), dom, grid);
    double sup = 0.0, sup_core = 0.0;
    for (int k = 0; k < grid.unknown_count(); ++k) {
      if (grid.node(k).cls != NodeClass::Interior || !grid.has_full_box(k)) continue;
      sup = std::max(sup, std::abs(f(k)));
      if (grid.node(k).x.norm() <= core) sup_core = std::max(sup_core, std::abs(f(k)));
    }
    sups.push_back(sup);
    sups_core.push_back(sup_core);
  }
  CHECK(sups[0] < 20.0 * spacings[0] * spacings[0]);
  CHECK(sups[1] < 20.0 * spacings[1] * spacings[1]);
  CHECK(std::log2(sups_core[0] / sups_core[1]) > 1.6);
}

TEST_CASE("picard_step: zero at t = 0 and homogeneity in t") {
  ChartedDomain dom = cap_domain(M_PI / 3, 0.09);
  Grid grid = build_grid(dom);
  ScalarField w(grid.unknown_count());
  for (int k = 0; k < grid.unknown_count(); ++k)
    w(k) = 0.2 * std::sin(3.0 * grid.node(k).x(0)) * std::cos(grid.node(k).x(1));

  CHECK(picard_step(w, 0.0, inverse_square(), dom, grid).lpNorm<Eigen::Infinity>() == 0.0);

  ScalarField full = picard_step(w, 1.0, inverse_square(), dom, grid);
  for (double t : {0.25, 0.5, 0.75}) {
    ScalarField part = picard_step(w, t, inverse_square(), dom, grid);
    CHECK((part - t * full).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("solve_bump: trivial exact solution for H = |X|^-1") {
  ChartedDomain dom = cap_domain(75.0 * M_PI / 180.0, 0.08);
  SolverConfig cfg;  // defaults: picard_then_newton, staged t and eps

  auto [u0, rep0] = solve_bump(dom, inverse_radius(), cfg);
  CHECK(rep0.status == SolveStatus::Converged);
  CHECK(u0.lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK(rep0.c0.pass);
  CHECK(rep0.final_residual <= cfg.tol_residual);

  Grid grid = build_grid(dom);
  auto [u1, rep1] =
      solve_bump(dom, inverse_radius(), cfg, ScalarField::Constant(grid.unknown_count(), 0.2));
  CHECK(rep1.status == SolveStatus::Converged);
  CHECK(u1.lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("solve_bump: hypothesis gate") {
  ChartedDomain dom = cap_domain(M_PI / 3, 0.1);
  CurvatureSpec bad = CurvatureSpec::constant(1.0, 0.5, 1.0);  // H(r1 q) = 1 < 2
  auto [u, rep] = solve_bump(dom, bad, SolverConfig{});
  CHECK(rep.status == SolveStatus::HypothesisFail);
  CHECK(u.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("pure radial powers have the exact trivial solution") {
  // H(X) = |X|^-gamma equals one on the unit sphere, so u = 0 solves the
  // problem node-wise exactly and the solver stops immediately.
  ChartedDomain dom = cap_domain(M_PI / 3, 0.1);
  Grid grid = build_grid(dom);
  CHECK(residual(ScalarField::Zero(grid.unknown_count()), inverse_square(), dom, grid)
            .lpNorm<Eigen::Infinity>() < 1e-14);
  auto [u, rep] = solve_bump(dom, inverse_square(), SolverConfig{});
  CHECK(rep.status == SolveStatus::Converged);
  CHECK(u.lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("solve_bump: max_iterations = 1 on a nontrivial curvature stops early") {
  ChartedDomain dom = cap_domain(M_PI / 3, 0.1);
  SolverConfig cfg;
  cfg.scheme = Scheme::Picard;
  cfg.max_iterations = 1;
  cfg.t_schedule = {1.0};
  cfg.eps_schedule = {};
  cfg.tol_residual = 1e-12;
  auto [u, rep] = solve_bump(dom, scaled_inverse_square(), cfg);
  CHECK(rep.status == SolveStatus::MaxIter);
}

TEST_CASE("solve_bump: fixed point property and determinism for H = 1.3 |X|^-2") {
  ChartedDomain dom = cap_domain(M_PI / 3, 0.07);
  SolverConfig cfg;
  auto [u, rep] = solve_bump(dom, scaled_inverse_square(), cfg);
  REQUIRE(rep.status == SolveStatus::Converged);
  CHECK(rep.c0.pass);
  CHECK(rep.final_residual <= cfg.tol_residual);
  CHECK(u.maxCoeff() > 0.1);  // genuinely nontrivial profile
  CHECK(u.maxCoeff() < std::log(2.0) + 1e-6);
  CHECK(u.minCoeff() > std::log(0.5) - 1e-6);

  Grid grid = build_grid(dom);
  // A converged field is a fixed point of T_1 up to the solver tolerances.
  ScalarField next = picard_step(u, 1.0, scaled_inverse_square(), dom, grid);
  CHECK((next - u).lpNorm<Eigen::Infinity>() < 1e-7);

  auto [u2, rep2] = solve_bump(dom, scaled_inverse_square(), cfg);
  CHECK((u - u2).lpNorm<Eigen::Infinity>() == 0.0);
  REQUIRE(rep.stages.size() == rep2.stages.size());
  for (std::size_t s = 0; s < rep.stages.size(); ++s) {
    REQUIRE(rep.stages[s].residuals.size() == rep2.stages[s].residuals.size());
    for (std::size_t i = 0; i < rep.stages[s].residuals.size(); ++i)
      CHECK(rep.stages[s].residuals[i] == rep2.stages[s].residuals[i]);
  }
}

TEST_CASE("epsilon homotopy agrees with the direct solve") {
  ChartedDomain dom = cap_domain(M_PI / 3, 0.09);

  SolverConfig staged;  // default eps schedule {0.1, 0.01, 0}
  SolverConfig direct;
  direct.eps_schedule = {};

  for (const CurvatureSpec& spec : {inverse_radius(), scaled_inverse_square()}) {
    auto [u_staged, rep_staged] = solve_bump(dom, spec, staged);
    auto [u_direct, rep_direct] = solve_bump(dom, spec, direct);
    REQUIRE(rep_staged.status == SolveStatus::Converged);
    REQUIRE(rep_direct.status == SolveStatus::Converged);
    CHECK((u_staged - u_direct).lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("newton_jacobian agrees with directional finite differences") {
  ChartedDomain dom = cap_domain(M_PI / 3, 0.09);
  Grid grid = build_grid(dom);

  ScalarField u(grid.unknown_count()), v(grid.unknown_count());
  for (int k = 0; k < grid.unknown_count(); ++k) {
    const Eigen::VectorXd& x = grid.node(k).x;
    u(k) = 0.15 * std::sin(2.0 * x(0) + 0.3) * std::cos(1.7 * x(1));
    v(k) = 0.5 * std::cos(1.1 * x(0)) * std::sin(2.3 * x(1) + 0.1);
  }

  Eigen::SparseMatrix<double> jac = newton_jacobian(u, 1.0, inverse_square(), dom, grid);
  ScalarField jv = jac * v;
  ScalarField f0 = residual(u, inverse_square(), dom, grid, 1.0);

  double prev_err = -1.0;
  for (double s : {1e-4, 1e-5}) {
    ScalarField fd = (residual(u + s * v, inverse_square(), dom, grid, 1.0) - f0) / s;
    const double err = (fd - jv).lpNorm<Eigen::Infinity>();
    const double scale = jv.lpNorm<Eigen::Infinity>() + 1.0;
    CHECK(err / scale < 100.0 * s);
    if (prev_err >= 0.0) CHECK(err < prev_err);
    prev_err = err;
  }
}

TEST_CASE("newton_step: fixed point stays put, quadratic convergence nearby") {
  ChartedDomain dom = cap_domain(M_PI / 3, 0.05);
  Grid grid = build_grid(dom);

  // Start from the analytic reflected cap plus a smooth perturbation.
  ScalarField u = reflected_cap_field(dom, grid);
  const double R = dom.cap_chart_ball_radius();
  for (int k = 0; k < grid.unknown_count(); ++k) {
    const Eigen::VectorXd& x = grid.node(k).x;
    u(k) += 0.05 * (R * R - x.squaredNorm()) / (R * R);
  }

  std::vector<double> residuals{
      residual(u, unit_constant(), dom, grid, 1.0).lpNorm<Eigen::Infinity>()};
  for (int it = 0; it < 6; ++it) {
    u = newton_step(u, 1.0, unit_constant(), dom, grid);
    residuals.push_back(residual(u, unit_constant(), dom, grid, 1.0).lpNorm<Eigen::Infinity>());
  }
  CHECK(residuals.back() < 1e-9);
  // Quadratic-ish contraction while above the discretization floor.
  for (std::size_t i = 0; i + 1 < residuals.size(); ++i) {
    if (residuals[i] < 1e-6 || residuals[i + 1] < 1e-10) break;
    CHECK(residuals[i + 1] < 0.5 * residuals[i]);
  }

  // The converged discrete solution tracks the analytic profile.
  ScalarField exact = reflected_cap_field(dom, grid);
  CHECK((u - exact).lpNorm<Eigen::Infinity>() < 5.0 * 0.05 * 0.05);

  // At the fixed point the Newton correction is negligible.
  ScalarField again = newton_step(u, 1.0, unit_constant(), dom, grid);
  CHECK((again - u).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("check_c0_bounds") {
  CurvatureSpec spec = inverse_radius();
  ScalarField u = ScalarField::Zero(10);
  C0Bounds ok = check_c0_bounds(u, spec, 0.05);
  CHECK(ok.pass);

  ScalarField bad = u;
  bad(3) = std::log(2.0) + 1.0;
  CHECK_FALSE(check_c0_bounds(bad, spec, 0.05).pass);
  bad(3) = std::log(0.5) - 1.0;
  CHECK_FALSE(check_c0_bounds(bad, spec, 0.05).pass);
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  cfg.t_schedule = {0.5, 0.25, 1.0};
  CHECK_THROWS_AS(cfg.validate(), SolverError);
  cfg = SolverConfig{};
  cfg.t_schedule = {0.5};
  CHECK_THROWS_AS(cfg.validate(), SolverError);
  cfg = SolverConfig{};
  cfg.eps_schedule = {0.1, 0.2, 0.0};
  CHECK_THROWS_AS(cfg.validate(), SolverError);
  cfg = SolverConfig{};
  cfg.eps_schedule = {0.1, 0.01};
  CHECK_THROWS_AS(cfg.validate(), SolverError);
  cfg = SolverConfig{};
  cfg.tol_residual = -1.0;
  CHECK_THROWS_AS(cfg.validate(), SolverError);
}

TEST_CASE("uniqueness probe: multi-start agreement for H = 1.3 |X|^-2") {
  ChartedDomain dom = cap_domain(M_PI / 3, 0.1);
  SolverConfig cfg;
  ProbeReport probe = uniqueness_probe(dom, scaled_inverse_square(), cfg, 3, 42);
  CHECK(probe.converged_count == 3);
  CHECK(probe.max_pairwise_in_A < 1e-6);
  CHECK(probe.clusters.size() == 1);
  CHECK(probe.cluster_in_A[0]);

  // Identical seed reproduces the runs bitwise.
  ProbeReport again = uniqueness_probe(dom, scaled_inverse_square(), cfg, 3, 42);
  for (std::size_t i = 0; i < probe.runs.size(); ++i)
    CHECK((probe.runs[i].u - again.runs[i].u).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("uniqueness probe: reflected cap is found and flagged outside A") {
  ChartedDomain dom = cap_domain(M_PI / 3, 0.06);
  Grid grid = build_grid(dom);

  SolverConfig cfg = direct_newton();
  // Seeded at the reflected profile plus a perturbation: Newton converges to
  // the second H-bump, which leaves A = unit sphere (r1 = r2 = 1).
  ScalarField seed = reflected_cap_field(dom, grid);
  const double R = dom.cap_chart_ball_radius();
  for (int k = 0; k < grid.unknown_count(); ++k)
    seed(k) += 0.03 * (R * R - grid.node(k).x.squaredNorm()) / (R * R);

  auto [u_reflected, rep_reflected] = solve_bump(dom, unit_constant(), cfg, seed);
  REQUIRE(rep_reflected.status == SolveStatus::Converged);
  CHECK_FALSE(rep_reflected.c0.pass);  // outside A
  CHECK(u_reflected.maxCoeff() > 0.5);

  auto [u_zero, rep_zero] = solve_bump(dom, unit_constant(), cfg);
  REQUIRE(rep_zero.status == SolveStatus::Converged);
  CHECK(rep_zero.c0.pass);
  CHECK(u_zero.lpNorm<Eigen::Infinity>() < 1e-10);

  // Center-value gap log 2 (the reflected cap at theta = 0).
  int center = grid.find({0, 0});
  REQUIRE(center >= 0);
  CHECK(std::abs(u_reflected(center) - u_zero(center) - std::log(2.0)) < 5.0 * 0.06 * 0.06);
}
