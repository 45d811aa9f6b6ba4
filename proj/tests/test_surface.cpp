#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "rbump/solver.hpp"
#include "rbump/surface.hpp"

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

}  // namespace

TEST_CASE("geometric mean curvature of the unit sphere is +1") {
  const double h = 0.05;
  ChartedDomain dom = cap_domain(M_PI / 3, h);
  Grid grid = build_grid(dom);
  ScalarField u = ScalarField::Zero(grid.unknown_count());
  for (int k = 0; k < grid.unknown_count(); ++k) {
    if (grid.node(k).cls != NodeClass::Interior || !grid.has_full_box(k)) continue;
    CHECK(mean_curvature_at(u, dom, grid, k) == doctest::Approx(1.0).epsilon(5 * h * h));
  }
}

TEST_CASE("geometric mean curvature of a dilated sphere is 1/c") {
  const double h = 0.05;
  ChartedDomain dom = cap_domain(M_PI / 3, h);
  Grid grid = build_grid(dom);
  for (double c : {0.7, 1.6}) {
    ScalarField u = ScalarField::Constant(grid.unknown_count(), std::log(c));
    for (int k = 0; k < grid.unknown_count(); ++k) {
      if (grid.node(k).cls != NodeClass::Interior || !grid.has_full_box(k)) continue;
      CHECK(mean_curvature_at(u, dom, grid, k) == doctest::Approx(1.0 / c).epsilon(5 * h * h));
    }
  }
}

TEST_CASE("reflected cap: unit sphere centered on the axis, curvature one") {
  const double h = 0.04;
  ChartedDomain dom = cap_domain(M_PI / 3, h);
  Grid grid = build_grid(dom);
  const Eigen::VectorXd axis = dom.cap_shape().center;  // center = 2 cos(60) axis = axis

  ScalarField u(grid.unknown_count());
  for (int k = 0; k < grid.unknown_count(); ++k)
    u(k) = std::log(2.0 * std::cos(dom.cap_colatitude(grid.node(k).x)));

  for (int k = 0; k < grid.unknown_count(); ++k) {
    const Eigen::VectorXd X = std::exp(u(k)) * dom.to_sphere(grid.node(k).x);
    CHECK(std::abs((X - axis).norm() - 1.0) < 1e-12);
    if (grid.node(k).cls == NodeClass::Interior && grid.has_full_box(k))
      CHECK(mean_curvature_at(u, dom, grid, k) == doctest::Approx(1.0).epsilon(10 * h * h));
  }
}

TEST_CASE("curvature match: pass on a converged solve, fail on a corrupted field") {
  const double h = 0.06;
  ChartedDomain dom = cap_domain(M_PI / 3, h);
  Grid grid = build_grid(dom);
  CurvatureSpec spec = CurvatureSpec::radial_power(1.3, 2.0, 0.5, 2.0);

  auto [u, rep] = solve_bump(dom, spec, SolverConfig{});
  REQUIRE(rep.status == SolveStatus::Converged);

  CurvatureMatchReport match = curvature_match(u, spec, dom, grid);
  CHECK(match.pass);
  CHECK(match.nodes_checked > 50);
  CHECK(match.sup_mismatch <= 10.0 * h * h);

  // Negative control: a smooth non-solution misses by O(1).
  ScalarField junk = u;
  for (int k = 0; k < grid.unknown_count(); ++k)
    junk(k) += 0.25 * std::sin(5.0 * grid.node(k).x(0));
  CurvatureMatchReport bad = curvature_match(junk, spec, dom, grid);
  CHECK_FALSE(bad.pass);
  CHECK(bad.sup_mismatch > 0.1);
}

TEST_CASE("radial ODE reference: f = 1/rho gives the zero profile") {
  auto f = [](double rho) { return 1.0 / rho; };
  RadialProfile p = radial_ode_reference(M_PI / 3, f, 2, 1e-10, std::log(0.5) - 1.0,
                                         std::log(2.0) + 1.0);
  CHECK(std::abs(p.center_value) < 1e-9);
  for (double uval : p.u) CHECK(std::abs(uval) < 1e-9);
}

TEST_CASE("radial ODE reference: f = 1 on the pi/3 cap recovers log(2 cos theta)") {
  auto f = [](double) { return 1.0; };
  // Bracket the nontrivial root only; the trivial u = 0 root lies outside.
  std::vector<double> eval_at;
  for (int i = 0; i <= 20; ++i) eval_at.push_back(i * (M_PI / 3) / 20.0);
  RadialProfile p = radial_ode_reference(M_PI / 3, f, 2, 1e-10, 0.2, 1.2, eval_at);
  CHECK(p.center_value == doctest::Approx(std::log(2.0)).epsilon(1e-8));
  for (double th : eval_at)
    CHECK(p.eval(th) == doctest::Approx(std::log(2.0 * std::cos(th))).epsilon(1e-7).scale(1.0));
}

TEST_CASE("radial ODE reference finds both roots for f = 1 in the wide bracket") {
  auto f = [](double) { return 1.0; };
  RadialProfile p = radial_ode_reference(M_PI / 3, f, 2, 1e-10, -1.0, 1.0);
  // Chosen profile is the in-annulus trivial solution; both roots reported.
  CHECK(std::abs(p.center_value) < 1e-9);
  REQUIRE(p.all_center_values.size() == 2);
  CHECK(std::abs(p.all_center_values[0]) < 1e-9);
  CHECK(p.all_center_values[1] == doctest::Approx(std::log(2.0)).epsilon(1e-8));
}

TEST_CASE("shooting and collocation agree to 1e-8 on a nontrivial profile") {
  auto f = [](double rho) { return 1.3 / (rho * rho); };
  const double theta0 = M_PI / 3;
  RadialProfile colloc = radial_ode_collocation(theta0, f, 2, 512);
  RadialProfile shoot = radial_ode_reference(theta0, f, 2, 1e-12, std::log(0.5) - 1.0,
                                             std::log(2.0) + 1.0, colloc.theta);
  CHECK(shoot.center_value > 0.1);
  CHECK(shoot.center_value < std::log(2.0));
  double worst = 0.0;
  for (std::size_t i = 0; i < colloc.theta.size(); ++i)
    worst = std::max(worst, std::abs(colloc.u[i] - shoot.eval(colloc.theta[i])));
  CHECK(worst < 1e-8);
}

TEST_CASE("shooting reports a missing bracket") {
  auto f = [](double) { return 5.0; };  // drives every profile far below zero
  CHECK_THROWS_AS(radial_ode_reference(M_PI / 3, f, 2, 1e-10, -1.0, 1.0), SurfaceError);
}

TEST_CASE("surface mesh: radii, boundary trace, normals") {
  const double h = 0.08;
  ChartedDomain dom = cap_domain(M_PI / 2, h);
  Grid grid = build_grid(dom);

  for (double c : {1.0, 1.4}) {
    ScalarField u = ScalarField::Constant(grid.unknown_count(), std::log(c));
    SurfaceMesh mesh = build_surface(u, dom, grid);
    REQUIRE(static_cast<int>(mesh.vertices.size()) > grid.unknown_count());
    for (int v = 0; v < mesh.node_vertex_count; ++v)
      CHECK(std::abs(mesh.vertices[static_cast<std::size_t>(v)].norm() - c) < 1e-10);
    for (std::size_t v = static_cast<std::size_t>(mesh.node_vertex_count);
         v < mesh.vertices.size(); ++v)
      CHECK(std::abs(mesh.vertices[v].norm() - 1.0) < 1e-10);  // boundary on the sphere
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
      CHECK(mesh.normals[v].norm() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(mesh.normals[v].dot(mesh.vertices[v]) < 0.0);
    }
    // Faces oriented counter-clockwise around the stored normals.
    for (const auto& tri : mesh.faces) {
      const Eigen::Vector3d& v0 = mesh.vertices[static_cast<std::size_t>(tri[0])];
      const Eigen::Vector3d& v1 = mesh.vertices[static_cast<std::size_t>(tri[1])];
      const Eigen::Vector3d& v2 = mesh.vertices[static_cast<std::size_t>(tri[2])];
      const Eigen::Vector3d nf = (v1 - v0).cross(v2 - v0);
      CHECK(nf.dot(mesh.normals[static_cast<std::size_t>(tri[0])]) > 0.0);
    }
  }
}

TEST_CASE("mesh export round trip") {
  SurfaceMesh tiny;
  tiny.vertices = {Eigen::Vector3d(0.1, 0.2, 0.3), Eigen::Vector3d(-1.0 / 3.0, 0.25, 1e-17),
                   Eigen::Vector3d(0.9999999999999999, -2.5, 4.0)};
  tiny.normals = {Eigen::Vector3d(0, 0, -1), Eigen::Vector3d(0, 0, -1),
                  Eigen::Vector3d(0, 0, -1)};
  tiny.faces = {{0, 1, 2}};
  tiny.node_vertex_count = 3;
  const std::string path = "tiny_mesh_test.obj";
  export_mesh(tiny, path);

  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  int v_lines = 0, vn_lines = 0, f_lines = 0;
  std::vector<Eigen::Vector3d> parsed;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      double a, b, c;
      ss >> a >> b >> c;
      parsed.emplace_back(a, b, c);
      ++v_lines;
    } else if (tag == "vn") {
      ++vn_lines;
    } else if (tag == "f") {
      ++f_lines;
    }
  }
  CHECK(v_lines == 3);
  CHECK(vn_lines == 3);
  CHECK(f_lines == 1);
  // 17 significant digits reproduce doubles exactly.
  for (int i = 0; i < 3; ++i)
    CHECK((parsed[static_cast<std::size_t>(i)] - tiny.vertices[static_cast<std::size_t>(i)])
              .norm() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("hemisphere export: all parsed radii within 1e-10 of one") {
  const double h = 0.1;
  ChartedDomain dom = cap_domain(M_PI / 2, h);
  Grid grid = build_grid(dom);
  ScalarField u = ScalarField::Zero(grid.unknown_count());
  SurfaceMesh mesh = build_surface(u, dom, grid);
  const std::string path = "hemisphere_test.obj";
  export_mesh(mesh, path);

  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("v ", 0) != 0) continue;
    std::istringstream ss(line.substr(2));
    double a, b, c;
    ss >> a >> b >> c;
    CHECK(std::abs(Eigen::Vector3d(a, b, c).norm() - 1.0) < 1e-10);
  }
  std::remove(path.c_str());
}

TEST_CASE("profile file carries the documented header") {
  RadialProfile p;
  p.theta = {0.0, 0.5, 1.0};
  p.u = {0.3, 0.2, 0.0};
  p.du = {0.0, -0.3, -0.4};
  const std::string path = "profile_test.txt";
  write_profile(p, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "# theta u");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);
  std::remove(path.c_str());
}

TEST_CASE("PDE solution against the 1-D shooting reference (nontrivial case)") {
  const double h = 0.07;
  ChartedDomain dom = cap_domain(M_PI / 3, h);
  Grid grid = build_grid(dom);
  CurvatureSpec spec = CurvatureSpec::radial_power(1.3, 2.0, 0.5, 2.0);

  auto [u, rep] = solve_bump(dom, spec, SolverConfig{});
  REQUIRE(rep.status == SolveStatus::Converged);

  std::vector<double> angles;
  for (int k = 0; k < grid.unknown_count(); ++k)
    angles.push_back(dom.cap_colatitude(grid.node(k).x));
  auto f = [](double rho) { return 1.3 / (rho * rho); };
  RadialProfile ode = radial_ode_reference(M_PI / 3, f, 2, 1e-12, std::log(0.5) - 1.0,
                                           std::log(2.0) + 1.0, angles);

  double worst = 0.0;
  for (int k = 0; k < grid.unknown_count(); ++k)
    worst = std::max(worst, std::abs(u(k) - ode.eval(angles[static_cast<std::size_t>(k)])));
  CHECK(worst <= 5.0 * h * h);
}
