#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "rbump/curvature.hpp"
#include "rbump/geometry.hpp"

namespace rbump {

struct SurfaceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Triangulated radial graph Sigma(u) = {e^{u(q)} q} over a 2-sphere domain.
/// The first `node_vertex_count` vertices correspond to grid unknowns in
/// order; the rest are boundary intersection points (radius one).
struct SurfaceMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Eigen::Vector3d> normals;  // unit, inward-radial: <N, X> < 0
  std::vector<std::array<int, 3>> faces;
  int node_vertex_count = 0;
};

SurfaceMesh build_surface(const ScalarField& u, const ChartedDomain& domain, const Grid& grid);

/// Mean curvature of the embedded graph at an interior node, computed from
/// first/second fundamental forms of finite differences of the embedding.
/// Deliberately independent of the PDE residual and assembly code paths.
double mean_curvature_at(const ScalarField& u, const ChartedDomain& domain, const Grid& grid,
                         int node);

struct CurvatureMatchReport {
  double sup_mismatch = 0.0;
  double threshold = 0.0;
  bool pass = false;
  int nodes_checked = 0;
};

/// sup over full-stencil interior nodes of |H_geometric - H(e^u q)|;
/// passes when below factor * h^2.
CurvatureMatchReport curvature_match(const ScalarField& u, const CurvatureSpec& spec,
                                     const ChartedDomain& domain, const Grid& grid,
                                     double threshold_factor = 10.0);

/// Solution profile of the rotationally symmetric reduction
///   u'' + (n-1)(1+u'^2) cot(theta) u' = n (1+u'^2)(1 - sqrt(1+u'^2) e^u f(e^u))
/// on [0, theta0] with u'(0) = 0, u(theta0) = 0.
struct RadialProfile {
  std::vector<double> theta;
  std::vector<double> u;
  std::vector<double> du;  // u'
  double center_value = 0.0;
  std::vector<double> all_center_values;  // every shooting root found

  double eval(double th) const;  // cubic Hermite between stored samples
};

/// Shooting solution of the reduced two-point problem. The shooting
/// parameter u(0) is bracketed inside [s_min, s_max]; among multiple roots
/// the one whose profile stays inside [s_min+1, s_max-1] (the log-annulus)
/// is preferred.
RadialProfile radial_ode_reference(double theta0, const std::function<double(double)>& f, int n,
                                   double tolerance, double s_min, double s_max,
                                   const std::vector<double>& eval_at = {});

/// Independent check: damped-Newton finite-difference collocation of the same
/// boundary value problem on a uniform grid, Richardson-extrapolated.
RadialProfile radial_ode_collocation(double theta0, const std::function<double(double)>& f, int n,
                                     int grid_points);

/// Wavefront OBJ: v/vn/f records, 17 significant digits, faces oriented
/// counter-clockwise around the stored (inward) normals.
void export_mesh(const SurfaceMesh& mesh, const std::string& path);

/// Two-column profile file with header line "# theta u".
void write_profile(const RadialProfile& profile, const std::string& path);

}  // namespace rbump
