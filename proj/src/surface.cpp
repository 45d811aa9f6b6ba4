#include "rbump/surface.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>

namespace rbump {

namespace {

Eigen::Vector3d embed(const ScalarField& u, const ChartedDomain& domain, const Grid& grid,
                      int node) {
  const Eigen::VectorXd q = domain.to_sphere(grid.node(node).x);
  return std::exp(u(node)) * Eigen::Vector3d(q(0), q(1), q(2));
}

}  // namespace

// ---------------------------------------------------------------------------
// Mesh construction
// ---------------------------------------------------------------------------

SurfaceMesh build_surface(const ScalarField& u, const ChartedDomain& domain, const Grid& grid) {
  if (grid.dimension() != 2)
    throw SurfaceError("mesh export is implemented for n = 2 only");
  if (!u.allFinite()) throw SurfaceError("non-finite field");

  SurfaceMesh mesh;
  mesh.node_vertex_count = grid.unknown_count();
  mesh.vertices.reserve(static_cast<std::size_t>(grid.unknown_count()));
  for (int k = 0; k < grid.unknown_count(); ++k) mesh.vertices.push_back(embed(u, domain, grid, k));

  // Boundary vertices: one per cut arm, shared between the two cells that
  // touch the arm. Key: (node, axis, dir).
  std::map<std::array<int, 3>, int> boundary_vertex;
  auto boundary_vid = [&](int node, int axis, int dir) {
    std::array<int, 3> key{node, axis, dir};
    auto it = boundary_vertex.find(key);
    if (it != boundary_vertex.end()) return it->second;
    Eigen::VectorXd xb = grid.arm_boundary_point(node, axis, dir);
    Eigen::VectorXd q = domain.to_sphere(xb);
    int vid = static_cast<int>(mesh.vertices.size());
    mesh.vertices.emplace_back(q(0), q(1), q(2));  // u = 0 on the boundary
    boundary_vertex.emplace(key, vid);
    return vid;
  };

  // Cells adjacent to any unknown node.
  std::set<std::array<int, 2>> cells;
  for (int k = 0; k < grid.unknown_count(); ++k) {
    const auto& lat = grid.node(k).lattice;
    for (int di = -1; di <= 0; ++di)
      for (int dj = -1; dj <= 0; ++dj) cells.insert({lat[0] + di, lat[1] + dj});
  }

  // Corner order walks the cell boundary counter-clockwise in the chart.
  const std::array<std::array<int, 2>, 4> corner_off{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};

  std::vector<std::array<int, 3>> polys;
  for (const auto& cell : cells) {
    std::array<int, 4> corner_node;
    for (int c = 0; c < 4; ++c)
      corner_node[static_cast<std::size_t>(c)] =
          grid.find({cell[0] + corner_off[static_cast<std::size_t>(c)][0],
                     cell[1] + corner_off[static_cast<std::size_t>(c)][1]});

    std::vector<int> poly;
    for (int c = 0; c < 4; ++c) {
      const int a = corner_node[static_cast<std::size_t>(c)];
      const int b = corner_node[static_cast<std::size_t>((c + 1) % 4)];
      // Axis and direction of the edge c -> c+1.
      const auto& oa = corner_off[static_cast<std::size_t>(c)];
      const auto& ob = corner_off[static_cast<std::size_t>((c + 1) % 4)];
      const int axis = (oa[0] != ob[0]) ? 0 : 1;
      const int forward = (axis == 0 ? ob[0] - oa[0] : ob[1] - oa[1]) > 0 ? 1 : 0;

      if (a >= 0) poly.push_back(a);
      if ((a >= 0) != (b >= 0)) {
        if (a >= 0)
          poly.push_back(boundary_vid(a, axis, forward));
        else
          poly.push_back(boundary_vid(b, axis, 1 - forward));
      }
    }
    if (poly.size() < 3) continue;

    // Chart-plane polygon area; slivers from grazing cuts are dropped.
    double area = 0.0;
    auto chart_of = [&](int vid) {
      const Eigen::Vector3d& vtx = mesh.vertices[static_cast<std::size_t>(vid)];
      Eigen::VectorXd q(3);
      q << vtx(0), vtx(1), vtx(2);
      return domain.to_chart(q / q.norm());
    };
    std::vector<Eigen::VectorXd> pts;
    pts.reserve(poly.size());
    for (int vid : poly) pts.push_back(chart_of(vid));
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
      const Eigen::VectorXd e1 = pts[i] - pts[0], e2 = pts[i + 1] - pts[0];
      area += 0.5 * std::abs(e1(0) * e2(1) - e1(1) * e2(0));
    }
    if (area < 1e-14) continue;

    for (std::size_t i = 1; i + 1 < poly.size(); ++i)
      polys.push_back({poly[0], poly[static_cast<std::size_t>(i)], poly[static_cast<std::size_t>(i + 1)]});
  }

  // Orient faces counter-clockwise around the inward-radial normal and
  // accumulate vertex normals.
  mesh.normals.assign(mesh.vertices.size(), Eigen::Vector3d::Zero());
  for (auto& tri : polys) {
    const Eigen::Vector3d& v0 = mesh.vertices[static_cast<std::size_t>(tri[0])];
    const Eigen::Vector3d& v1 = mesh.vertices[static_cast<std::size_t>(tri[1])];
    const Eigen::Vector3d& v2 = mesh.vertices[static_cast<std::size_t>(tri[2])];
    Eigen::Vector3d nf = (v1 - v0).cross(v2 - v0);
    const Eigen::Vector3d centroid = (v0 + v1 + v2) / 3.0;
    if (nf.dot(centroid) > 0.0) {
      std::swap(tri[1], tri[2]);
      nf = -nf;
    }
    for (int c = 0; c < 3; ++c) mesh.normals[static_cast<std::size_t>(tri[static_cast<std::size_t>(c)])] += nf;
    mesh.faces.push_back(tri);
  }
  for (std::size_t i = 0; i < mesh.normals.size(); ++i) {
    double norm = mesh.normals[i].norm();
    if (norm > 0.0) {
      mesh.normals[i] /= norm;
    } else {
      mesh.normals[i] = -mesh.vertices[i].normalized();
    }
    if (mesh.normals[i].dot(mesh.vertices[i]) > 0.0) mesh.normals[i] = -mesh.normals[i];
  }
  return mesh;
}

// ---------------------------------------------------------------------------
// Geometric mean curvature
// ---------------------------------------------------------------------------

double mean_curvature_at(const ScalarField& u, const ChartedDomain& domain, const Grid& grid,
                         int node) {
  const int n = grid.dimension();
  if (!grid.has_full_box(node))
    throw SurfaceError("mean_curvature_at requires a full lattice box around the node");

  const double h = grid.spacing();
  auto embed_at = [&](const std::vector<int>& lat) {
    const int k = grid.find(lat);
    const Eigen::VectorXd q = domain.to_sphere(grid.node(k).x);
    return Eigen::VectorXd(std::exp(u(k)) * q);
  };

  const auto& lat0 = grid.node(node).lattice;
  auto shifted = [&](int a, int da, int b, int db) {
    std::vector<int> lat = lat0;
    lat[static_cast<std::size_t>(a)] += da;
    if (b >= 0) lat[static_cast<std::size_t>(b)] += db;
    return lat;
  };

  const Eigen::VectorXd x0 = embed_at(lat0);
  Eigen::MatrixXd tangents(n + 1, n);
  std::vector<Eigen::VectorXd> xp(static_cast<std::size_t>(n)), xm(static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) {
    xp[static_cast<std::size_t>(a)] = embed_at(shifted(a, 1, -1, 0));
    xm[static_cast<std::size_t>(a)] = embed_at(shifted(a, -1, -1, 0));
    tangents.col(a) = (xp[static_cast<std::size_t>(a)] - xm[static_cast<std::size_t>(a)]) / (2.0 * h);
  }

  // Unit normal: the orthogonal complement of the tangent plane, oriented
  // inward-radially (<N, X> < 0); for u = 0 this gives H = +1.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(tangents);
  Eigen::MatrixXd qfull = qr.householderQ();
  Eigen::VectorXd normal = qfull.col(n);
  if (normal.dot(x0) > 0.0) normal = -normal;

  Eigen::MatrixXd first(n, n), second(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) first(a, b) = tangents.col(a).dot(tangents.col(b));
    const Eigen::VectorXd daa = (xp[static_cast<std::size_t>(a)] - 2.0 * x0 + xm[static_cast<std::size_t>(a)]) / (h * h);
    second(a, a) = daa.dot(normal);
    for (int b = a + 1; b < n; ++b) {
      const Eigen::VectorXd dab =
          (embed_at(shifted(a, 1, b, 1)) + embed_at(shifted(a, -1, b, -1)) -
           embed_at(shifted(a, 1, b, -1)) - embed_at(shifted(a, -1, b, 1))) /
          (4.0 * h * h);
      second(a, b) = dab.dot(normal);
      second(b, a) = second(a, b);
    }
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(first);
  if (!lu.isInvertible())
    throw SurfaceError("singular first fundamental form (corrupt field?)");
  return (lu.solve(second)).trace() / n;
}

CurvatureMatchReport curvature_match(const ScalarField& u, const CurvatureSpec& spec,
                                     const ChartedDomain& domain, const Grid& grid,
                                     double threshold_factor) {
  CurvatureMatchReport rep;
  rep.threshold = threshold_factor * grid.spacing() * grid.spacing();
  for (int k = 0; k < grid.unknown_count(); ++k) {
    if (grid.node(k).cls != NodeClass::Interior || !grid.has_full_box(k)) continue;
    const double hg = mean_curvature_at(u, domain, grid, k);
    const Eigen::VectorXd q = domain.to_sphere(grid.node(k).x);
    const double hp = spec.evaluate(q, std::exp(u(k)));
    rep.sup_mismatch = std::max(rep.sup_mismatch, std::abs(hg - hp));
    ++rep.nodes_checked;
  }
  rep.pass = rep.nodes_checked > 0 && rep.sup_mismatch <= rep.threshold;
  return rep;
}

// ---------------------------------------------------------------------------
// Radial ODE reference
// ---------------------------------------------------------------------------

namespace {

struct OdeState {
  double u, v;  // u and u'
};

// u'' = -(n-1)(1+v^2) cot(theta) v + n(1+v^2)(1 - sqrt(1+v^2) e^u f(e^u))
OdeState ode_rhs(double theta, const OdeState& y, int n, const std::function<double(double)>& f) {
  const double one_v2 = 1.0 + y.v * y.v;
  const double radius = std::exp(y.u);
  const double cot = std::cos(theta) / std::sin(theta);
  OdeState d;
  d.u = y.v;
  d.v = -(n - 1) * one_v2 * cot * y.v +
        n * one_v2 * (1.0 - std::sqrt(one_v2) * radius * f(radius));
  return d;
}

// Dormand-Prince 5(4) with adaptive steps; records the trajectory at every
// accepted step and exactly at the requested output angles.
struct OdeResult {
  std::vector<double> theta, u, du;
};

OdeResult integrate_profile(double s, double theta0, int n, const std::function<double(double)>& f,
                            double tol, const std::vector<double>& eval_at) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  OdeResult out;
  std::vector<double> marks = eval_at;
  std::sort(marks.begin(), marks.end());
  std::size_t next_mark = 0;

  // Series start around the pole: u = s + a t^2/2 with a = 1 - e^s f(e^s).
  const double a_coef = 1.0 - std::exp(s) * f(std::exp(s));
  double theta = std::min(1e-6, 1e-3 * theta0);
  OdeState y{s + 0.5 * a_coef * theta * theta, a_coef * theta};

  auto record = [&](double th, const OdeState& st) {
    out.theta.push_back(th);
    out.u.push_back(st.u);
    out.du.push_back(st.v);
  };
  while (next_mark < marks.size() && marks[next_mark] <= theta) {
    const double tm = marks[next_mark];
    record(tm, OdeState{s + 0.5 * a_coef * tm * tm, a_coef * tm});
    ++next_mark;
  }
  record(theta, y);

  double hstep = std::min(1e-3, theta0 / 50.0);
  const double hmax = theta0 / 64.0;
  OdeState k1 = ode_rhs(theta, y, n, f);
  int guard = 0;
  while (theta < theta0 && ++guard < 2000000) {
    bool hit_mark = false;
    double target = theta0;
    if (next_mark < marks.size() && marks[next_mark] < target) {
      target = marks[next_mark];
      hit_mark = true;
    }
    double hs = std::min({hstep, hmax, target - theta});
    if (hs <= 1e-15) {
      if (hit_mark) {
        record(target, y);
        ++next_mark;
        continue;
      }
      break;
    }

    OdeState y2{y.u + hs * a21 * k1.u, y.v + hs * a21 * k1.v};
    OdeState k2 = ode_rhs(theta + c2 * hs, y2, n, f);
    OdeState y3{y.u + hs * (a31 * k1.u + a32 * k2.u), y.v + hs * (a31 * k1.v + a32 * k2.v)};
    OdeState k3 = ode_rhs(theta + c3 * hs, y3, n, f);
    OdeState y4{y.u + hs * (a41 * k1.u + a42 * k2.u + a43 * k3.u),
                y.v + hs * (a41 * k1.v + a42 * k2.v + a43 * k3.v)};
    OdeState k4 = ode_rhs(theta + c4 * hs, y4, n, f);
    OdeState y5{y.u + hs * (a51 * k1.u + a52 * k2.u + a53 * k3.u + a54 * k4.u),
                y.v + hs * (a51 * k1.v + a52 * k2.v + a53 * k3.v + a54 * k4.v)};
    OdeState k5 = ode_rhs(theta + c5 * hs, y5, n, f);
    OdeState y6{y.u + hs * (a61 * k1.u + a62 * k2.u + a63 * k3.u + a64 * k4.u + a65 * k5.u),
                y.v + hs * (a61 * k1.v + a62 * k2.v + a63 * k3.v + a64 * k4.v + a65 * k5.v)};
    OdeState k6 = ode_rhs(theta + hs, y6, n, f);
    OdeState ynew{y.u + hs * (b1 * k1.u + b3 * k3.u + b4 * k4.u + b5 * k5.u + b6 * k6.u),
                  y.v + hs * (b1 * k1.v + b3 * k3.v + b4 * k4.v + b5 * k5.v + b6 * k6.v)};
    OdeState k7 = ode_rhs(theta + hs, ynew, n, f);

    const double err_u = hs * (e1 * k1.u + e3 * k3.u + e4 * k4.u + e5 * k5.u + e6 * k6.u + e7 * k7.u);
    const double err_v = hs * (e1 * k1.v + e3 * k3.v + e4 * k4.v + e5 * k5.v + e6 * k6.v + e7 * k7.v);
    const double scale_u = tol + tol * std::abs(ynew.u);
    const double scale_v = tol + tol * std::abs(ynew.v);
    const double err = std::sqrt(0.5 * (std::pow(err_u / scale_u, 2) + std::pow(err_v / scale_v, 2)));

    if (err <= 1.0) {
      theta += hs;
      y = ynew;
      k1 = k7;  // FSAL
      if (hit_mark && std::abs(theta - target) < 1e-14) {
        record(theta, y);
        ++next_mark;
      } else {
        record(theta, y);
      }
      // Radial graphs fold when u' blows up (the sphere no longer covers the
      // cap); past that point the profile is meaningless.
      if (!std::isfinite(y.u) || !std::isfinite(y.v) || std::abs(y.v) > 1e10) break;
    }
    const double fac = std::clamp(0.9 * std::pow(err > 0 ? 1.0 / err : 1e6, 0.2), 0.2, 5.0);
    hstep = hs * fac;
  }
  return out;
}

double shoot_endpoint(double s, double theta0, int n, const std::function<double(double)>& f,
                      double tol) {
  OdeResult res = integrate_profile(s, theta0, n, f, tol, {theta0});
  for (std::size_t i = res.theta.size(); i-- > 0;)
    if (std::abs(res.theta[i] - theta0) < 1e-12) return res.u[i];
  return res.u.back();
}

}  // namespace

double RadialProfile::eval(double th) const {
  if (theta.empty()) throw SurfaceError("empty profile");
  if (th <= theta.front()) return u.front();
  if (th >= theta.back()) return u.back();
  auto it = std::upper_bound(theta.begin(), theta.end(), th);
  const std::size_t hi = static_cast<std::size_t>(it - theta.begin());
  const std::size_t lo = hi - 1;
  const double width = theta[hi] - theta[lo];
  if (width <= 0.0) return u[lo];
  const double t = (th - theta[lo]) / width;
  const double h00 = (1 + 2 * t) * (1 - t) * (1 - t);
  const double h10 = t * (1 - t) * (1 - t);
  const double h01 = t * t * (3 - 2 * t);
  const double h11 = t * t * (t - 1);
  return h00 * u[lo] + h10 * width * du[lo] + h01 * u[hi] + h11 * width * du[hi];
}

RadialProfile radial_ode_reference(double theta0, const std::function<double(double)>& f, int n,
                                   double tolerance, double s_min, double s_max,
                                   const std::vector<double>& eval_at) {
  if (!(theta0 > 0.0 && theta0 < M_PI)) throw SurfaceError("theta0 must lie in (0, pi)");
  const double ode_tol = 1e-12;

  auto endpoint = [&](double s) { return shoot_endpoint(s, theta0, n, f, ode_tol); };

  // Bracket scan over the shooting parameter u(0).
  const int scan = 81;
  std::vector<double> svals(scan), fvals(scan);
  for (int i = 0; i < scan; ++i) {
    svals[static_cast<std::size_t>(i)] = s_min + (s_max - s_min) * i / (scan - 1);
    fvals[static_cast<std::size_t>(i)] = endpoint(svals[static_cast<std::size_t>(i)]);
  }

  std::vector<double> roots;
  for (int i = 0; i < scan; ++i) {
    if (std::abs(fvals[static_cast<std::size_t>(i)]) < 1e-13) {
      roots.push_back(svals[static_cast<std::size_t>(i)]);
      continue;
    }
    if (i + 1 < scan && fvals[static_cast<std::size_t>(i)] * fvals[static_cast<std::size_t>(i + 1)] < 0.0) {
      double lo = svals[static_cast<std::size_t>(i)], hi = svals[static_cast<std::size_t>(i + 1)];
      double flo = fvals[static_cast<std::size_t>(i)];
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = endpoint(mid);
        if (std::abs(fm) < tolerance && (hi - lo) < 1e-12) {
          lo = hi = mid;
          break;
        }
        if (flo * fm <= 0.0) {
          hi = mid;
        } else {
          lo = mid;
          flo = fm;
        }
      }
      // A sign change across a fold of the radial graph is a jump, not a
      // root; keep only candidates where the endpoint really vanishes.
      const double candidate = 0.5 * (lo + hi);
      if (std::abs(endpoint(candidate)) < std::max(1e-8, 10.0 * tolerance))
        roots.push_back(candidate);
    }
  }
  // Deduplicate near-identical roots from the direct-hit path.
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-9; }),
              roots.end());
  if (roots.empty())
    throw SurfaceError("shooting bracket not found in [" + std::to_string(s_min) + ", " +
                       std::to_string(s_max) + "]");

  // Prefer the root whose profile stays inside the log-annulus
  // [s_min + 1, s_max - 1] (the bracket pads the annulus by one).
  const double lo_bound = s_min + 1.0 - 1e-6, hi_bound = s_max - 1.0 + 1e-6;
  auto build = [&](double s) {
    std::vector<double> marks = eval_at;
    marks.push_back(theta0);
    OdeResult res = integrate_profile(s, theta0, n, f, ode_tol, marks);
    RadialProfile profile;
    profile.theta = std::move(res.theta);
    profile.u = std::move(res.u);
    profile.du = std::move(res.du);
    profile.center_value = s;
    return profile;
  };

  RadialProfile chosen;
  bool have = false;
  for (double s : roots) {
    RadialProfile p = build(s);
    const double pmin = *std::min_element(p.u.begin(), p.u.end());
    const double pmax = *std::max_element(p.u.begin(), p.u.end());
    if (!have && pmin >= lo_bound && pmax <= hi_bound) {
      chosen = std::move(p);
      have = true;
    }
  }
  if (!have) chosen = build(roots.front());
  chosen.all_center_values = roots;
  return chosen;
}

RadialProfile radial_ode_collocation(double theta0, const std::function<double(double)>& f, int n,
                                     int grid_points) {
  if (grid_points < 8) throw SurfaceError("collocation needs at least 8 grid points");

  // Second-order finite-difference collocation with damped Newton; the pole
  // equation uses the even symmetry of u.
  auto solve_grid = [&](int npts) {
    const double dtheta = theta0 / npts;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(npts);  // u_0..u_{npts-1}; u_npts = 0

    auto local_residual = [&](int j, double um, double u0, double up) {
      if (j == 0) {
        // n u''(0) = n (1 - e^u f(e^u)); symmetric second difference.
        const double upp = 2.0 * (up - u0) / (dtheta * dtheta);
        return upp - (1.0 - std::exp(u0) * f(std::exp(u0)));
      }
      const double th = j * dtheta;
      const double upp = (up - 2.0 * u0 + um) / (dtheta * dtheta);
      const double du = (up - um) / (2.0 * dtheta);
      const double one_v2 = 1.0 + du * du;
      const double radius = std::exp(u0);
      return upp + (n - 1) * one_v2 * (std::cos(th) / std::sin(th)) * du -
             n * one_v2 * (1.0 - std::sqrt(one_v2) * radius * f(radius));
    };

    auto assemble_residual = [&](const Eigen::VectorXd& uu) {
      Eigen::VectorXd r(npts);
      for (int j = 0; j < npts; ++j) {
        const double um = j > 0 ? uu(j - 1) : 0.0;
        const double up = j + 1 < npts ? uu(j + 1) : 0.0;
        r(j) = local_residual(j, um, uu(j), up);
      }
      return r;
    };

    for (int newton = 0; newton < 80; ++newton) {
      Eigen::VectorXd r = assemble_residual(u);
      const double rnorm = r.lpNorm<Eigen::Infinity>();
      if (rnorm < 1e-13) break;

      // Tridiagonal Jacobian by differencing the local residual.
      Eigen::VectorXd dl(npts), dm(npts), du_band(npts);
      const double fd = 1e-7;
      for (int j = 0; j < npts; ++j) {
        const double um = j > 0 ? u(j - 1) : 0.0;
        const double up = j + 1 < npts ? u(j + 1) : 0.0;
        const double base = local_residual(j, um, u(j), up);
        dm(j) = (local_residual(j, um, u(j) + fd, up) - base) / fd;
        dl(j) = j > 0 ? (local_residual(j, um + fd, u(j), up) - base) / fd : 0.0;
        du_band(j) = j + 1 < npts ? (local_residual(j, um, u(j), up + fd) - base) / fd : 0.0;
      }

      // Thomas solve J delta = -r.
      Eigen::VectorXd c(npts), d(npts);
      double beta = dm(0);
      if (std::abs(beta) < 1e-300) throw SurfaceError("collocation Jacobian singular");
      c(0) = du_band(0) / beta;
      d(0) = -r(0) / beta;
      for (int j = 1; j < npts; ++j) {
        beta = dm(j) - dl(j) * c(j - 1);
        if (std::abs(beta) < 1e-300) throw SurfaceError("collocation Jacobian singular");
        c(j) = du_band(j) / beta;
        d(j) = (-r(j) - dl(j) * d(j - 1)) / beta;
      }
      Eigen::VectorXd delta(npts);
      delta(npts - 1) = d(npts - 1);
      for (int j = npts - 2; j >= 0; --j) delta(j) = d(j) - c(j) * delta(j + 1);

      double step = 1.0;
      for (int bt = 0; bt < 40; ++bt) {
        Eigen::VectorXd cand = u + step * delta;
        if (assemble_residual(cand).lpNorm<Eigen::Infinity>() < rnorm) {
          u = std::move(cand);
          break;
        }
        step *= 0.5;
        if (bt == 39) u += step * delta;
      }
    }
    return u;
  };

  const int coarse = grid_points;
  Eigen::VectorXd uc = solve_grid(coarse);
  Eigen::VectorXd uf = solve_grid(2 * coarse);

  RadialProfile profile;
  profile.theta.resize(static_cast<std::size_t>(coarse + 1));
  profile.u.resize(static_cast<std::size_t>(coarse + 1));
  for (int j = 0; j <= coarse; ++j) {
    profile.theta[static_cast<std::size_t>(j)] = theta0 * j / coarse;
    const double ucj = j < coarse ? uc(j) : 0.0;
    const double ufj = 2 * j < 2 * coarse ? uf(2 * j) : 0.0;
    profile.u[static_cast<std::size_t>(j)] = (4.0 * ufj - ucj) / 3.0;  // Richardson
  }
  profile.du.resize(profile.u.size());
  const double dt = theta0 / coarse;
  for (std::size_t j = 0; j < profile.u.size(); ++j) {
    if (j == 0)
      profile.du[j] = 0.0;
    else if (j + 1 == profile.u.size())
      profile.du[j] = (profile.u[j] - profile.u[j - 1]) / dt;
    else
      profile.du[j] = (profile.u[j + 1] - profile.u[j - 1]) / (2.0 * dt);
  }
  profile.center_value = profile.u[0];
  return profile;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

void export_mesh(const SurfaceMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SurfaceError("cannot open '" + path + "' for writing");
  char buf[256];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v(0), v(1), v(2));
    out << buf;
  }
  for (const auto& vn : mesh.normals) {
    std::snprintf(buf, sizeof(buf), "vn %.17g %.17g %.17g\n", vn(0), vn(1), vn(2));
    out << buf;
  }
  for (const auto& face : mesh.faces)
    out << "f " << face[0] + 1 << "//" << face[0] + 1 << ' ' << face[1] + 1 << "//" << face[1] + 1
        << ' ' << face[2] + 1 << "//" << face[2] + 1 << '\n';
  if (!out.good()) throw SurfaceError("write failure on '" + path + "'");
}

void write_profile(const RadialProfile& profile, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SurfaceError("cannot open '" + path + "' for writing");
  out << "# theta u\n";
  char buf[128];
  for (std::size_t i = 0; i < profile.theta.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", profile.theta[i], profile.u[i]);
    out << buf;
  }
  if (!out.good()) throw SurfaceError("write failure on '" + path + "'");
}

}  // namespace rbump
