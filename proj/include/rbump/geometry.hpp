#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "rbump/expression.hpp"

namespace rbump {

/// Nodal values over the grid unknowns (interior + irregular nodes).
/// Boundary values of u-like fields are implicitly zero.
using ScalarField = Eigen::VectorXd;

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct GridError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Stereographic chart
// ---------------------------------------------------------------------------

/// Orthogonal matrix R with R e_{n+1} = pole (minimal rotation, with a
/// two-step construction when pole is close to -e_{n+1}).
Eigen::MatrixXd rotation_to_pole(const Eigen::VectorXd& pole);

/// Inverse stereographic projection. With the canonical pole e_{n+1},
/// q = (2x, |x|^2 - 1)/(1 + |x|^2); a general pole conjugates by the
/// rotation taking e_{n+1} to it.
Eigen::VectorXd chart_to_sphere(const Eigen::VectorXd& x, const Eigen::VectorXd& pole);

/// Stereographic projection from `pole`; rejects q == pole.
Eigen::VectorXd sphere_to_chart(const Eigen::VectorXd& q, const Eigen::VectorXd& pole);

/// lambda(x) = 2/(1+|x|^2); the round metric pulls back to lambda^2 * euclidean.
double conformal_factor(const Eigen::VectorXd& x);

/// s_k = d/dx_k log lambda = -2 x_k / (1+|x|^2).
Eigen::VectorXd log_conformal_gradient(const Eigen::VectorXd& x);

// ---------------------------------------------------------------------------
// Domain
// ---------------------------------------------------------------------------

struct GeodesicCap {
  Eigen::VectorXd center;  // unit vector in R^{n+1}
  double theta0 = 0.0;     // geodesic radius in (0, pi)
};

struct LevelSetShape {
  Expression phi;           // over chart coordinates x1..xn; Omega = {phi < 0}
  Eigen::MatrixXd bbox;     // n x 2, chart bounding box containing the domain
};

/// A proper domain of S^n together with a fixed stereographic chart.
class ChartedDomain {
public:
  static ChartedDomain cap(int dimension, const Eigen::VectorXd& center, double theta0,
                           double grid_spacing,
                           const std::optional<Eigen::VectorXd>& pole = std::nullopt);

  static ChartedDomain level_set(int dimension, Expression phi, const Eigen::MatrixXd& bbox,
                                 const Eigen::VectorXd& pole, double grid_spacing);

  int dimension() const { return n_; }
  const Eigen::VectorXd& pole() const { return pole_; }
  double grid_spacing() const { return h_; }

  bool is_cap() const { return cap_.has_value(); }
  const GeodesicCap& cap_shape() const { return *cap_; }

  /// Level function on the chart: negative inside, positive outside.
  double phi(const Eigen::VectorXd& x) const;

  /// Chart bounding box (n x 2) that contains the domain image.
  const Eigen::MatrixXd& chart_bbox() const { return bbox_; }

  Eigen::VectorXd to_sphere(const Eigen::VectorXd& x) const { return chart_to_sphere(x, pole_); }
  Eigen::VectorXd to_chart(const Eigen::VectorXd& q) const { return sphere_to_chart(q, pole_); }

  /// Geodesic distance on S^n from the cap center (caps only).
  double cap_colatitude(const Eigen::VectorXd& x) const;

  /// Exact chart image ball of a cap: center and radius (caps only).
  Eigen::VectorXd cap_chart_ball_center() const;
  double cap_chart_ball_radius() const;

private:
  ChartedDomain() = default;

  int n_ = 2;
  Eigen::VectorXd pole_;
  double h_ = 0.0;
  std::optional<GeodesicCap> cap_;
  std::optional<LevelSetShape> level_;
  Eigen::MatrixXd bbox_;
};

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

enum class NodeClass { Interior, Irregular };

/// One axis arm of a node. neighbor >= 0: uncut, points at another unknown.
/// neighbor == -1: the arm is cut by the boundary at fraction sigma of h
/// (sigma == 1 when the boundary passes through the lattice neighbor itself).
struct ArmInfo {
  int neighbor = -1;
  double sigma = 1.0;
};

struct GridNode {
  std::vector<int> lattice;  // integer lattice coordinates, size n
  Eigen::VectorXd x;         // chart position = spacing * lattice
  NodeClass cls = NodeClass::Interior;
  std::vector<std::array<ArmInfo, 2>> arms;  // [axis][0: -, 1: +]
};

struct GridBuildOptions {
  double sigma_min = 1e-6;     // arms shorter than sigma_min*h snap to the boundary
  double bisect_tol = 1e-12;   // relative to h
  int min_interior = 25;
};

class Grid {
public:
  int dimension() const { return n_; }
  double spacing() const { return h_; }
  int unknown_count() const { return static_cast<int>(nodes_.size()); }
  int interior_count() const { return interior_count_; }
  const GridNode& node(int k) const { return nodes_[static_cast<std::size_t>(k)]; }

  /// Unknown index at the given lattice coordinates, or -1.
  int find(const std::vector<int>& lattice) const;

  /// Lattice neighbor along +/- axis; -1 when cut or absent.
  int neighbor(int k, int axis, int dir) const {
    return nodes_[static_cast<std::size_t>(k)].arms[static_cast<std::size_t>(axis)][static_cast<std::size_t>(dir)].neighbor;
  }

  /// True if every lattice point of the 3^n box around k is an unknown.
  bool has_full_box(int k) const;

  /// Chart position of the boundary crossing of a cut arm.
  Eigen::VectorXd arm_boundary_point(int k, int axis, int dir) const;

  /// All cut-arm crossing points (chart coordinates).
  std::vector<Eigen::VectorXd> boundary_points() const;

  /// Structural hash over lattice coordinates, classes and arm fractions;
  /// used to match stored solution files against a rebuilt grid.
  std::uint64_t structure_hash() const;

  friend Grid build_grid(const ChartedDomain& domain, const GridBuildOptions& opts);

private:
  int n_ = 0;
  double h_ = 0.0;
  int interior_count_ = 0;
  std::vector<GridNode> nodes_;
  std::unordered_map<std::string, int> lattice_index_;
};

Grid build_grid(const ChartedDomain& domain, const GridBuildOptions& opts = {});

// ---------------------------------------------------------------------------
// Finite-difference stencils
// ---------------------------------------------------------------------------

/// One term of a difference formula. col >= 0 refers to a grid unknown;
/// col == -1 is a point on (or beyond) the boundary where u-like fields
/// vanish. pos is the chart position of the sample.
struct StencilTerm {
  int col;
  double w;
  Eigen::VectorXd pos;
};

using Stencil = std::vector<StencilTerm>;

/// d/dx_axis. Centered at interior nodes, non-uniform 3-point at cut arms.
Stencil stencil_d1(const Grid& grid, int node, int axis);

/// d^2/dx_axis^2. Centered, Shortley-Weller at cut arms.
Stencil stencil_d2(const Grid& grid, int node, int axis);

/// d^2/dx_i dx_j, i != j. 4-point cross stencil; falls back to a one-sided
/// quadrant stencil when diagonal neighbors are outside, and substitutes the
/// homogeneous boundary value for points that remain unavailable.
Stencil stencil_dmixed(const Grid& grid, int node, int ai, int aj);

double apply_stencil(const Stencil& s, const ScalarField& field);
double apply_stencil(const Stencil& s, const std::function<double(const Eigen::VectorXd&)>& f);

// ---------------------------------------------------------------------------
// Frame derivatives
// ---------------------------------------------------------------------------

/// Covariant derivatives in an orthonormal frame of S^n at a node:
/// grad_i = lambda^-1 d_i u,  hess_ij = lambda^-2 (d2_ij u - Gamma^k_ij d_k u)
/// with the conformal Christoffel symbols
/// Gamma^k_ij = s_i delta_jk + s_j delta_ik - s_k delta_ij.
struct FrameDerivs {
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

FrameDerivs frame_derivatives(const Grid& grid, const ChartedDomain& domain, int node,
                              const ScalarField& field);
FrameDerivs frame_derivatives(const Grid& grid, const ChartedDomain& domain, int node,
                              const std::function<double(const Eigen::VectorXd&)>& f);

/// Frame gradient only (first-order stencils; cheaper than the full Hessian).
Eigen::VectorXd frame_gradient(const Grid& grid, const ChartedDomain& domain, int node,
                               const ScalarField& field);

// ---------------------------------------------------------------------------
// Domain sampling (hypothesis validators, constants)
// ---------------------------------------------------------------------------

struct DomainSamples {
  std::vector<Eigen::VectorXd> interior_chart;
  std::vector<Eigen::VectorXd> boundary_chart;
};

/// Deterministic interior/boundary chart samples of the domain, roughly the
/// requested counts.
DomainSamples sample_domain(const ChartedDomain& domain, int interior_target,
                            int boundary_target);

}  // namespace rbump
