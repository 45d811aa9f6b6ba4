#include "rbump/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <sstream>

namespace rbump {

namespace {

std::string lattice_key(const std::vector<int>& lat) {
  std::string key;
  key.reserve(lat.size() * sizeof(int));
  for (int v : lat) key.append(reinterpret_cast<const char*>(&v), sizeof(int));
  return key;
}

Eigen::MatrixXd rotation_single_step(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const auto m = a.size();
  Eigen::VectorXd s = a + b;
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(m, m);
  r -= (s * s.transpose()) / (1.0 + a.dot(b));
  r += 2.0 * b * a.transpose();
  return r;
}

}  // namespace

Eigen::MatrixXd rotation_to_pole(const Eigen::VectorXd& pole) {
  const auto m = pole.size();
  Eigen::VectorXd a = Eigen::VectorXd::Zero(m);
  a(m - 1) = 1.0;
  Eigen::VectorXd b = pole.normalized();

  double c = a.dot(b);
  if (c > -0.9) return rotation_single_step(a, b);

  // Near-antipodal: go through an intermediate direction orthogonal to both.
  int best = 0;
  double best_score = 2.0;
  for (int k = 0; k < m; ++k) {
    double score = std::max(std::abs(a(k)), std::abs(b(k)));
    if (score < best_score) {
      best_score = score;
      best = k;
    }
  }
  Eigen::VectorXd mvec = Eigen::VectorXd::Zero(m);
  mvec(best) = 1.0;
  mvec -= mvec.dot(a) * a;
  mvec -= mvec.dot(b) * b;
  mvec.normalize();
  return rotation_single_step(mvec, b) * rotation_single_step(a, mvec);
}

Eigen::VectorXd chart_to_sphere(const Eigen::VectorXd& x, const Eigen::VectorXd& pole) {
  const auto n = x.size();
  const double t = x.squaredNorm();
  Eigen::VectorXd y(n + 1);
  y.head(n) = 2.0 * x / (1.0 + t);
  y(n) = (t - 1.0) / (1.0 + t);
  return rotation_to_pole(pole) * y;
}

Eigen::VectorXd sphere_to_chart(const Eigen::VectorXd& q, const Eigen::VectorXd& pole) {
  const auto n = q.size() - 1;
  Eigen::VectorXd y = rotation_to_pole(pole).transpose() * q;
  const double denom = 1.0 - y(n);
  if (denom <= 1e-14)
    throw DomainError("sphere_to_chart: point coincides with the projection pole");
  return y.head(n) / denom;
}

double conformal_factor(const Eigen::VectorXd& x) { return 2.0 / (1.0 + x.squaredNorm()); }

Eigen::VectorXd log_conformal_gradient(const Eigen::VectorXd& x) {
  return -2.0 * x / (1.0 + x.squaredNorm());
}

// ---------------------------------------------------------------------------
// ChartedDomain
// ---------------------------------------------------------------------------

ChartedDomain ChartedDomain::cap(int dimension, const Eigen::VectorXd& center, double theta0,
                                 double grid_spacing,
                                 const std::optional<Eigen::VectorXd>& pole) {
  if (dimension < 2) throw DomainError("dimension must be >= 2");
  if (center.size() != dimension + 1) throw DomainError("cap center must be in R^{n+1}");
  if (!(theta0 > 0.0 && theta0 < M_PI)) throw DomainError("cap radius must lie in (0, pi)");
  if (!(grid_spacing > 0.0)) throw DomainError("grid spacing must be positive");

  ChartedDomain d;
  d.n_ = dimension;
  d.h_ = grid_spacing;
  d.cap_ = GeodesicCap{center.normalized(), theta0};
  d.pole_ = pole ? pole->normalized() : Eigen::VectorXd(-d.cap_->center);

  // Pole strictly outside the closed cap.
  const double cos_pc = d.pole_.dot(d.cap_->center);
  if (cos_pc >= std::cos(theta0) - 1e-12)
    throw DomainError("projection pole lies inside or on the closure of the cap");

  const Eigen::VectorXd m = d.cap_chart_ball_center();
  const double r = d.cap_chart_ball_radius();
  d.bbox_.resize(dimension, 2);
  for (int k = 0; k < dimension; ++k) {
    d.bbox_(k, 0) = m(k) - r - 2.0 * grid_spacing;
    d.bbox_(k, 1) = m(k) + r + 2.0 * grid_spacing;
  }
  return d;
}

ChartedDomain ChartedDomain::level_set(int dimension, Expression phi, const Eigen::MatrixXd& bbox,
                                       const Eigen::VectorXd& pole, double grid_spacing) {
  if (dimension < 2) throw DomainError("dimension must be >= 2");
  if (phi.variable_count() != static_cast<std::size_t>(dimension))
    throw DomainError("level-set phi must use exactly the chart coordinates x1..xn");
  if (bbox.rows() != dimension || bbox.cols() != 2) throw DomainError("bbox must be n x 2");
  if (pole.size() != dimension + 1) throw DomainError("pole must be in R^{n+1}");
  if (!(grid_spacing > 0.0)) throw DomainError("grid spacing must be positive");

  ChartedDomain d;
  d.n_ = dimension;
  d.h_ = grid_spacing;
  d.pole_ = pole.normalized();
  d.level_ = LevelSetShape{std::move(phi), bbox};
  d.bbox_ = bbox;

  // The domain must stay inside the box; sample the box faces. A bounded
  // chart image is what keeps the pole outside the closure.
  const int per_axis = 17;
  std::vector<double> coords(static_cast<std::size_t>(dimension));
  for (int face_axis = 0; face_axis < dimension; ++face_axis) {
    for (int side = 0; side < 2; ++side) {
      std::vector<int> idx(static_cast<std::size_t>(dimension - 1), 0);
      for (;;) {
        int pos = 0;
        for (int k = 0; k < dimension; ++k) {
          if (k == face_axis) {
            coords[static_cast<std::size_t>(k)] = bbox(k, side);
          } else {
            double t = idx[static_cast<std::size_t>(pos)] / double(per_axis - 1);
            coords[static_cast<std::size_t>(k)] = bbox(k, 0) + t * (bbox(k, 1) - bbox(k, 0));
            ++pos;
          }
        }
        if (d.level_->phi.eval(coords) < 0.0)
          throw DomainError("level-set domain reaches the bounding box; enlarge bbox");
        int carry = 0;
        while (carry < dimension - 1) {
          if (++idx[static_cast<std::size_t>(carry)] < per_axis) break;
          idx[static_cast<std::size_t>(carry)] = 0;
          ++carry;
        }
        if (carry == dimension - 1) break;
      }
    }
  }
  return d;
}

double ChartedDomain::phi(const Eigen::VectorXd& x) const {
  if (cap_) return std::cos(cap_->theta0) - to_sphere(x).dot(cap_->center);
  std::vector<double> vals(x.data(), x.data() + x.size());
  return level_->phi.eval(vals);
}

double ChartedDomain::cap_colatitude(const Eigen::VectorXd& x) const {
  if (!cap_) throw DomainError("cap_colatitude: not a cap domain");
  double c = to_sphere(x).dot(cap_->center);
  return std::acos(std::clamp(c, -1.0, 1.0));
}

Eigen::VectorXd ChartedDomain::cap_chart_ball_center() const {
  if (!cap_) throw DomainError("not a cap domain");
  const Eigen::VectorXd& c = cap_->center;
  Eigen::VectorXd e = pole_ - pole_.dot(c) * c;
  if (e.norm() < 1e-9) {
    // Pole on the cap axis (antipodal): image ball is centered at the origin,
    // any equatorial direction gives its radius.
    int k = 0;
    for (int i = 0; i < c.size(); ++i)
      if (std::abs(c(i)) < std::abs(c(k))) k = i;
    e = Eigen::VectorXd::Zero(c.size());
    e(k) = 1.0;
    e -= e.dot(c) * c;
  }
  e.normalize();
  Eigen::VectorXd qp = std::cos(cap_->theta0) * c + std::sin(cap_->theta0) * e;
  Eigen::VectorXd qm = std::cos(cap_->theta0) * c - std::sin(cap_->theta0) * e;
  return 0.5 * (to_chart(qp) + to_chart(qm));
}

double ChartedDomain::cap_chart_ball_radius() const {
  if (!cap_) throw DomainError("not a cap domain");
  const Eigen::VectorXd& c = cap_->center;
  Eigen::VectorXd e = pole_ - pole_.dot(c) * c;
  if (e.norm() < 1e-9) return std::tan(0.5 * cap_->theta0);
  e.normalize();
  Eigen::VectorXd qp = std::cos(cap_->theta0) * c + std::sin(cap_->theta0) * e;
  Eigen::VectorXd qm = std::cos(cap_->theta0) * c - std::sin(cap_->theta0) * e;
  return 0.5 * (to_chart(qp) - to_chart(qm)).norm();
}

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

int Grid::find(const std::vector<int>& lattice) const {
  auto it = lattice_index_.find(lattice_key(lattice));
  return it == lattice_index_.end() ? -1 : it->second;
}

bool Grid::has_full_box(int k) const {
  const GridNode& nd = node(k);
  std::vector<int> lat = nd.lattice;
  std::vector<int> offs(static_cast<std::size_t>(n_), -1);
  for (;;) {
    bool all_zero = true;
    for (int v : offs) all_zero = all_zero && v == 0;
    if (!all_zero) {
      for (int d = 0; d < n_; ++d) lat[static_cast<std::size_t>(d)] = nd.lattice[static_cast<std::size_t>(d)] + offs[static_cast<std::size_t>(d)];
      if (find(lat) < 0) return false;
    }
    int carry = 0;
    while (carry < n_) {
      if (++offs[static_cast<std::size_t>(carry)] <= 1) break;
      offs[static_cast<std::size_t>(carry)] = -1;
      ++carry;
    }
    if (carry == n_) return true;
  }
}

Eigen::VectorXd Grid::arm_boundary_point(int k, int axis, int dir) const {
  const GridNode& nd = node(k);
  const ArmInfo& arm = nd.arms[static_cast<std::size_t>(axis)][static_cast<std::size_t>(dir)];
  Eigen::VectorXd p = nd.x;
  p(axis) += (dir == 1 ? 1.0 : -1.0) * arm.sigma * h_;
  return p;
}

std::vector<Eigen::VectorXd> Grid::boundary_points() const {
  std::vector<Eigen::VectorXd> pts;
  for (int k = 0; k < unknown_count(); ++k) {
    const GridNode& nd = node(k);
    for (int d = 0; d < n_; ++d)
      for (int s = 0; s < 2; ++s)
        if (nd.arms[static_cast<std::size_t>(d)][static_cast<std::size_t>(s)].neighbor < 0)
          pts.push_back(arm_boundary_point(k, d, s));
  }
  return pts;
}

std::uint64_t Grid::structure_hash() const {
  std::uint64_t hash = 1469598103934665603ull;
  auto mix = [&hash](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      hash ^= p[i];
      hash *= 1099511628211ull;
    }
  };
  mix(&n_, sizeof(n_));
  mix(&h_, sizeof(h_));
  for (const GridNode& nd : nodes_) {
    for (int v : nd.lattice) mix(&v, sizeof(v));
    int cls = static_cast<int>(nd.cls);
    mix(&cls, sizeof(cls));
    for (const auto& pair : nd.arms)
      for (const ArmInfo& arm : pair) {
        mix(&arm.neighbor, sizeof(arm.neighbor));
        mix(&arm.sigma, sizeof(arm.sigma));
      }
  }
  return hash;
}

Grid build_grid(const ChartedDomain& domain, const GridBuildOptions& opts) {
  const int n = domain.dimension();
  const double h = domain.grid_spacing();

  std::vector<int> ilo(static_cast<std::size_t>(n)), ihi(static_cast<std::size_t>(n));
  for (int d = 0; d < n; ++d) {
    ilo[static_cast<std::size_t>(d)] = static_cast<int>(std::ceil(domain.chart_bbox()(d, 0) / h)) - 1;
    ihi[static_cast<std::size_t>(d)] = static_cast<int>(std::floor(domain.chart_bbox()(d, 1) / h)) + 1;
  }

  auto position = [&](const std::vector<int>& lat) {
    Eigen::VectorXd x(n);
    for (int d = 0; d < n; ++d) x(d) = h * lat[static_cast<std::size_t>(d)];
    return x;
  };

  // Pass 1: lattice points strictly inside the domain.
  std::vector<std::vector<int>> candidates;
  std::unordered_map<std::string, int> cand_index;
  {
    std::vector<int> lat = ilo;
    for (;;) {
      if (domain.phi(position(lat)) < 0.0) {
        cand_index.emplace(lattice_key(lat), static_cast<int>(candidates.size()));
        candidates.push_back(lat);
      }
      int carry = 0;
      while (carry < n) {
        if (++lat[static_cast<std::size_t>(carry)] <= ihi[static_cast<std::size_t>(carry)]) break;
        lat[static_cast<std::size_t>(carry)] = ilo[static_cast<std::size_t>(carry)];
        ++carry;
      }
      if (carry == n) break;
    }
  }
  if (candidates.empty()) throw GridError("grid too coarse: no lattice point falls inside the domain");

  // Boundary crossing fraction along an arm; phi(a) < 0 <= phi(b) assumed.
  auto crossing = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double pb = domain.phi(b);
    if (pb == 0.0) return 1.0;
    if (pb < 0.0) throw GridError("domain leaves the chart bounding box; enlarge it");
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60 && (hi - lo) > opts.bisect_tol; ++it) {
      double mid = 0.5 * (lo + hi);
      (domain.phi(a + mid * (b - a)) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };

  struct TempArm {
    int cand = -1;  // candidate index or -1
    double sigma = 1.0;
  };
  const std::size_t ncand = candidates.size();
  std::vector<std::vector<std::array<TempArm, 2>>> arms(
      ncand, std::vector<std::array<TempArm, 2>>(static_cast<std::size_t>(n)));
  std::vector<bool> demoted(ncand, false);

  for (std::size_t k = 0; k < ncand; ++k) {
    Eigen::VectorXd xk = position(candidates[k]);
    for (int d = 0; d < n; ++d) {
      for (int s = 0; s < 2; ++s) {
        std::vector<int> nb = candidates[k];
        nb[static_cast<std::size_t>(d)] += (s == 1 ? 1 : -1);
        auto it = cand_index.find(lattice_key(nb));
        TempArm& arm = arms[k][static_cast<std::size_t>(d)][static_cast<std::size_t>(s)];
        if (it != cand_index.end()) {
          arm.cand = it->second;
          arm.sigma = 1.0;
        } else {
          arm.cand = -1;
          arm.sigma = crossing(xk, position(nb));
          if (arm.sigma < opts.sigma_min) demoted[k] = true;
        }
      }
    }
  }

  // Snapped nodes become boundary points; arms pointing at them are cut at
  // the full spacing.
  Grid grid;
  grid.n_ = n;
  grid.h_ = h;
  std::vector<int> final_index(ncand, -1);
  for (std::size_t k = 0; k < ncand; ++k)
    if (!demoted[k]) {
      final_index[k] = grid.unknown_count();
      GridNode nd;
      nd.lattice = candidates[k];
      nd.x = position(candidates[k]);
      nd.arms.resize(static_cast<std::size_t>(n));
      grid.nodes_.push_back(std::move(nd));
      grid.lattice_index_.emplace(lattice_key(candidates[k]), final_index[k]);
    }

  for (std::size_t k = 0; k < ncand; ++k) {
    if (demoted[k]) continue;
    GridNode& nd = grid.nodes_[static_cast<std::size_t>(final_index[k])];
    bool interior = true;
    for (int d = 0; d < n; ++d) {
      for (int s = 0; s < 2; ++s) {
        const TempArm& src = arms[k][static_cast<std::size_t>(d)][static_cast<std::size_t>(s)];
        ArmInfo& dst = nd.arms[static_cast<std::size_t>(d)][static_cast<std::size_t>(s)];
        if (src.cand >= 0 && !demoted[static_cast<std::size_t>(src.cand)]) {
          dst.neighbor = final_index[static_cast<std::size_t>(src.cand)];
          dst.sigma = 1.0;
        } else {
          dst.neighbor = -1;
          dst.sigma = src.cand >= 0 ? 1.0 : src.sigma;
          interior = false;
        }
      }
    }
    nd.cls = interior ? NodeClass::Interior : NodeClass::Irregular;
  }

  grid.interior_count_ = 0;
  for (const GridNode& nd : grid.nodes_)
    if (nd.cls == NodeClass::Interior) ++grid.interior_count_;
  if (grid.interior_count_ < opts.min_interior)
    throw GridError("grid too coarse: " + std::to_string(grid.interior_count_) +
                    " interior nodes, need >= " + std::to_string(opts.min_interior));

  // Single-component check over uncut arms.
  std::vector<char> seen(static_cast<std::size_t>(grid.unknown_count()), 0);
  std::deque<int> queue{0};
  seen[0] = 1;
  int reached = 1;
  while (!queue.empty()) {
    int k = queue.front();
    queue.pop_front();
    for (int d = 0; d < n; ++d)
      for (int s = 0; s < 2; ++s) {
        int nb = grid.neighbor(k, d, s);
        if (nb >= 0 && !seen[static_cast<std::size_t>(nb)]) {
          seen[static_cast<std::size_t>(nb)] = 1;
          ++reached;
          queue.push_back(nb);
        }
      }
  }
  if (reached != grid.unknown_count())
    throw GridError("grid interior is disconnected; refine the grid or fix the domain");

  return grid;
}

// ---------------------------------------------------------------------------
// Stencils
// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXd offset_pos(const Grid& grid, int node, int axis, double dist) {
  Eigen::VectorXd p = grid.node(node).x;
  p(axis) += dist;
  return p;
}

}  // namespace

Stencil stencil_d1(const Grid& grid, int node, int axis) {
  const GridNode& nd = grid.node(node);
  const double h = grid.spacing();
  const ArmInfo& am = nd.arms[static_cast<std::size_t>(axis)][0];
  const ArmInfo& ap = nd.arms[static_cast<std::size_t>(axis)][1];
  const double hm = am.sigma * h, hp = ap.sigma * h;
  const double denom = hp * hm * (hp + hm);

  Stencil s;
  s.push_back({ap.neighbor, hm * hm / denom, offset_pos(grid, node, axis, hp)});
  s.push_back({am.neighbor, -hp * hp / denom, offset_pos(grid, node, axis, -hm)});
  s.push_back({node, (hp * hp - hm * hm) / denom, nd.x});
  return s;
}

Stencil stencil_d2(const Grid& grid, int node, int axis) {
  const GridNode& nd = grid.node(node);
  const double h = grid.spacing();
  const ArmInfo& am = nd.arms[static_cast<std::size_t>(axis)][0];
  const ArmInfo& ap = nd.arms[static_cast<std::size_t>(axis)][1];
  const double hm = am.sigma * h, hp = ap.sigma * h;
  const double denom = hp * hm * (hp + hm);

  Stencil s;
  s.push_back({ap.neighbor, 2.0 * hm / denom, offset_pos(grid, node, axis, hp)});
  s.push_back({am.neighbor, 2.0 * hp / denom, offset_pos(grid, node, axis, -hm)});
  s.push_back({node, -2.0 * (hp + hm) / denom, nd.x});
  return s;
}

Stencil stencil_dmixed(const Grid& grid, int node, int ai, int aj) {
  const GridNode& nd = grid.node(node);
  const double h = grid.spacing();

  auto corner = [&](int si, int sj) {
    std::vector<int> lat = nd.lattice;
    lat[static_cast<std::size_t>(ai)] += si;
    lat[static_cast<std::size_t>(aj)] += sj;
    return grid.find(lat);
  };
  auto corner_pos = [&](int si, int sj) {
    Eigen::VectorXd p = nd.x;
    p(ai) += si * h;
    p(aj) += sj * h;
    return p;
  };

  const int cpp = corner(1, 1), cpm = corner(1, -1), cmp = corner(-1, 1), cmm = corner(-1, -1);

  Stencil s;
  if (cpp >= 0 && cpm >= 0 && cmp >= 0 && cmm >= 0) {
    const double w = 1.0 / (4.0 * h * h);
    s.push_back({cpp, w, corner_pos(1, 1)});
    s.push_back({cmm, w, corner_pos(-1, -1)});
    s.push_back({cpm, -w, corner_pos(1, -1)});
    s.push_back({cmp, -w, corner_pos(-1, 1)});
    return s;
  }

  // One-sided quadrant when a centered corner is missing.
  const std::array<std::array<int, 2>, 4> quadrants{{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};
  for (const auto& quad : quadrants) {
    int si = quad[0], sj = quad[1];
    int ni = grid.neighbor(node, ai, si > 0 ? 1 : 0);
    int nj = grid.neighbor(node, aj, sj > 0 ? 1 : 0);
    int nij = corner(si, sj);
    if (ni >= 0 && nj >= 0 && nij >= 0) {
      const double w = double(si * sj) / (h * h);
      s.push_back({nij, w, corner_pos(si, sj)});
      s.push_back({ni, -w, offset_pos(grid, node, ai, si * h)});
      s.push_back({nj, -w, offset_pos(grid, node, aj, sj * h)});
      s.push_back({node, w, nd.x});
      return s;
    }
  }

  // Fully cut corner region: centered cross with the homogeneous boundary
  // value substituted at missing points.
  const double w = 1.0 / (4.0 * h * h);
  s.push_back({cpp, w, corner_pos(1, 1)});
  s.push_back({cmm, w, corner_pos(-1, -1)});
  s.push_back({cpm, -w, corner_pos(1, -1)});
  s.push_back({cmp, -w, corner_pos(-1, 1)});
  return s;
}

double apply_stencil(const Stencil& s, const ScalarField& field) {
  double acc = 0.0;
  for (const StencilTerm& t : s)
    if (t.col >= 0) acc += t.w * field(t.col);
  return acc;
}

double apply_stencil(const Stencil& s, const std::function<double(const Eigen::VectorXd&)>& f) {
  double acc = 0.0;
  for (const StencilTerm& t : s) acc += t.w * f(t.pos);
  return acc;
}

// ---------------------------------------------------------------------------
// Frame derivatives
// ---------------------------------------------------------------------------

namespace {

template <typename Apply>
FrameDerivs frame_derivatives_impl(const Grid& grid, const ChartedDomain& domain, int node,
                                   Apply&& apply) {
  const int n = grid.dimension();
  const GridNode& nd = grid.node(node);

  Eigen::VectorXd d1(n);
  Eigen::MatrixXd d2(n, n);
  for (int i = 0; i < n; ++i) {
    d1(i) = apply(stencil_d1(grid, node, i));
    d2(i, i) = apply(stencil_d2(grid, node, i));
    for (int j = i + 1; j < n; ++j) {
      d2(i, j) = apply(stencil_dmixed(grid, node, i, j));
      d2(j, i) = d2(i, j);
    }
  }

  const double lambda = conformal_factor(nd.x);
  const Eigen::VectorXd s = log_conformal_gradient(nd.x);
  const double sd = s.dot(d1);

  FrameDerivs out;
  out.grad = d1 / lambda;
  out.hess.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      // Gamma^k_ij d1_k = s_i d1_j + s_j d1_i - (s . d1) delta_ij
      double gamma_term = s(i) * d1(j) + s(j) * d1(i) - (i == j ? sd : 0.0);
      out.hess(i, j) = (d2(i, j) - gamma_term) / (lambda * lambda);
    }
  (void)domain;
  return out;
}

}  // namespace

FrameDerivs frame_derivatives(const Grid& grid, const ChartedDomain& domain, int node,
                              const ScalarField& field) {
  return frame_derivatives_impl(grid, domain, node,
                                [&](const Stencil& s) { return apply_stencil(s, field); });
}

FrameDerivs frame_derivatives(const Grid& grid, const ChartedDomain& domain, int node,
                              const std::function<double(const Eigen::VectorXd&)>& f) {
  return frame_derivatives_impl(grid, domain, node,
                                [&](const Stencil& s) { return apply_stencil(s, f); });
}

Eigen::VectorXd frame_gradient(const Grid& grid, const ChartedDomain& domain, int node,
                               const ScalarField& field) {
  (void)domain;
  const int n = grid.dimension();
  const double lambda = conformal_factor(grid.node(node).x);
  Eigen::VectorXd g(n);
  for (int i = 0; i < n; ++i) g(i) = apply_stencil(stencil_d1(grid, node, i), field) / lambda;
  return g;
}

// ---------------------------------------------------------------------------
// Domain sampling
// ---------------------------------------------------------------------------

DomainSamples sample_domain(const ChartedDomain& domain, int interior_target,
                            int boundary_target) {
  DomainSamples out;
  const int n = domain.dimension();

  if (domain.is_cap() && n == 2) {
    const Eigen::VectorXd m = domain.cap_chart_ball_center();
    const double r = domain.cap_chart_ball_radius();
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    out.interior_chart.reserve(static_cast<std::size_t>(interior_target));
    for (int k = 0; k < interior_target; ++k) {
      double rad = r * std::sqrt((k + 0.5) / interior_target);
      double ang = golden * k;
      Eigen::VectorXd x = m;
      x(0) += rad * std::cos(ang);
      x(1) += rad * std::sin(ang);
      out.interior_chart.push_back(std::move(x));
    }
    out.boundary_chart.reserve(static_cast<std::size_t>(boundary_target));
    for (int k = 0; k < boundary_target; ++k) {
      double ang = 2.0 * M_PI * k / boundary_target;
      Eigen::VectorXd x = m;
      x(0) += r * std::cos(ang);
      x(1) += r * std::sin(ang);
      out.boundary_chart.push_back(std::move(x));
    }
    return out;
  }

  // General path: scan a sub-lattice of the bounding box; boundary points are
  // sign-change crossings along the scan axis.
  const Eigen::MatrixXd& bb = domain.chart_bbox();
  double volume = 1.0;
  for (int d = 0; d < n; ++d) volume *= bb(d, 1) - bb(d, 0);
  double spacing = std::pow(volume / std::max(1, interior_target), 1.0 / n);

  for (int attempt = 0; attempt < 4; ++attempt) {
    out.interior_chart.clear();
    out.boundary_chart.clear();
    std::vector<int> dims(static_cast<std::size_t>(n));
    for (int d = 0; d < n; ++d)
      dims[static_cast<std::size_t>(d)] =
          std::max(2, static_cast<int>(std::floor((bb(d, 1) - bb(d, 0)) / spacing)) + 1);

    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    Eigen::VectorXd x(n);
    double prev_phi = 1.0;
    Eigen::VectorXd prev_x(n);
    for (;;) {
      for (int d = 0; d < n; ++d)
        x(d) = bb(d, 0) + (bb(d, 1) - bb(d, 0)) * idx[static_cast<std::size_t>(d)] /
                              (dims[static_cast<std::size_t>(d)] - 1);
      double p = domain.phi(x);
      if (p < 0.0) out.interior_chart.push_back(x);
      if (idx[0] > 0 && ((prev_phi < 0.0) != (p < 0.0))) {
        // bisect along axis 0 between prev_x and x
        Eigen::VectorXd a = prev_phi < 0.0 ? prev_x : x;
        Eigen::VectorXd b = prev_phi < 0.0 ? x : prev_x;
        for (int it = 0; it < 60; ++it) {
          Eigen::VectorXd mid = 0.5 * (a + b);
          (domain.phi(mid) < 0.0 ? a : b) = mid;
        }
        out.boundary_chart.push_back(0.5 * (a + b));
      }
      prev_phi = p;
      prev_x = x;

      int carry = 0;
      while (carry < n) {
        if (++idx[static_cast<std::size_t>(carry)] < dims[static_cast<std::size_t>(carry)]) break;
        idx[static_cast<std::size_t>(carry)] = 0;
        ++carry;
      }
      if (carry == n) break;
      if (idx[0] == 0) prev_phi = 1.0;
    }
    if (static_cast<int>(out.interior_chart.size()) >= interior_target / 2 &&
        static_cast<int>(out.boundary_chart.size()) >= std::min(boundary_target, 8))
      break;
    spacing *= 0.5;
  }
  return out;
}

}  // namespace rbump
