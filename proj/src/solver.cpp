#include "rbump/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "rbump/parallel.hpp"

namespace rbump {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double sup_norm(const ScalarField& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

// Right-hand-side function b(q, u, v) = n (1+v)(1 - sqrt(1+v) e^u H(e^u q))
// at t = 1 together with its u- and v-partials.
struct RhsEval {
  double b = 0.0;
  double db_du = 0.0;
  double db_dv = 0.0;
};

RhsEval rhs_at(const CurvatureSpec& spec, const ChartedDomain& domain, const Grid& grid, int node,
               double u, double v) {
  const int n = grid.dimension();
  const Eigen::VectorXd q = domain.to_sphere(grid.node(node).x);
  const double radius = std::exp(u);
  const double hval = spec.evaluate(q, radius);
  const double hrad = spec.radial_partial(q, radius);
  const double root = std::sqrt(1.0 + v);

  RhsEval out;
  out.b = n * (1.0 + v) * (1.0 - root * radius * hval);
  out.db_dv = n * (1.0 - 1.5 * root * radius * hval);
  out.db_du = -n * (1.0 + v) * root * (radius * hval + radius * radius * hrad);
  return out;
}

}  // namespace

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIter: return "max_iterations";
    case SolveStatus::Diverged: return "diverged";
    case SolveStatus::HypothesisFail: return "hypothesis_fail";
  }
  return "unknown";
}

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::Picard: return "picard";
    case Scheme::Newton: return "newton";
    case Scheme::PicardThenNewton: return "picard_then_newton";
  }
  return "unknown";
}

void SolverConfig::validate() const {
  if (t_schedule.empty() || t_schedule.back() != 1.0)
    throw SolverError("t schedule must be nonempty and end at 1");
  for (std::size_t i = 0; i < t_schedule.size(); ++i) {
    if (t_schedule[i] <= 0.0 || t_schedule[i] > 1.0)
      throw SolverError("t schedule entries must lie in (0, 1]");
    if (i > 0 && t_schedule[i] <= t_schedule[i - 1])
      throw SolverError("t schedule must be strictly increasing");
  }
  if (!eps_schedule.empty()) {
    if (eps_schedule.back() != 0.0) throw SolverError("eps schedule must end at 0");
    for (std::size_t i = 0; i < eps_schedule.size(); ++i) {
      if (eps_schedule[i] < 0.0) throw SolverError("eps schedule entries must be >= 0");
      if (i > 0 && eps_schedule[i] >= eps_schedule[i - 1])
        throw SolverError("eps schedule must be strictly decreasing");
    }
  }
  if (!(tol_residual > 0.0) || !(tol_increment > 0.0))
    throw SolverError("tolerances must be positive");
  if (max_iterations < 1) throw SolverError("max_iterations must be >= 1");
  if (!(newton_initial_step > 0.0 && newton_initial_step <= 1.0))
    throw SolverError("newton initial step must lie in (0, 1]");
  if (!(newton_backtrack > 0.0 && newton_backtrack < 1.0))
    throw SolverError("newton backtracking factor must lie in (0, 1)");
}

ScalarField residual(const ScalarField& u, const CurvatureSpec& spec, const ChartedDomain& domain,
                     const Grid& grid, double t) {
  const int unknowns = grid.unknown_count();
  if (u.size() != unknowns) throw SolverError("field length does not match grid unknowns");

  ScalarField f(unknowns);
  for (int k = 0; k < unknowns; ++k) {
    FrameDerivs fd = frame_derivatives(grid, domain, k, u);
    const double v = fd.grad.squaredNorm();
    Eigen::MatrixXd a2 = (1.0 + v) * Eigen::MatrixXd::Identity(grid.dimension(), grid.dimension()) -
                         fd.grad * fd.grad.transpose();
    const double lhs = (a2.array() * fd.hess.array()).sum();
    f(k) = lhs - t * rhs_at(spec, domain, grid, k, u(k), v).b;
  }
  return f;
}

ScalarField picard_step(const ScalarField& w, double t, const CurvatureSpec& spec,
                        const ChartedDomain& domain, const Grid& grid, LinearMethod method) {
  LinearSystem sys = assemble(w, t, spec, domain, grid);
  SolveOptions opts;
  opts.method = method;
  return solve(sys, opts);
}

Eigen::SparseMatrix<double> newton_jacobian(const ScalarField& u, double t,
                                            const CurvatureSpec& spec,
                                            const ChartedDomain& domain, const Grid& grid) {
  const int n = grid.dimension();
  return assemble_frame_operator(
      domain, grid, [&](int k, Eigen::MatrixXd& a2, Eigen::VectorXd& a1, double& a0) {
        FrameDerivs fd = frame_derivatives(grid, domain, k, u);
        const double v = fd.grad.squaredNorm();
        a2 = (1.0 + v) * Eigen::MatrixXd::Identity(n, n) - fd.grad * fd.grad.transpose();

        RhsEval rhs = rhs_at(spec, domain, grid, k, u(k), v);
        // d/d(grad u): coefficient differentiation of a^ij u_ij plus the
        // chain rule through v = |grad u|^2 in the right-hand side.
        const double tr = fd.hess.trace();
        a1 = 2.0 * tr * fd.grad - 2.0 * (fd.hess * fd.grad) - 2.0 * t * rhs.db_dv * fd.grad;
        a0 = -t * rhs.db_du;
      });
}

ScalarField newton_step(const ScalarField& u, double t, const CurvatureSpec& spec,
                        const ChartedDomain& domain, const Grid& grid, double initial_step,
                        double backtrack, LinearMethod method) {
  ScalarField f = residual(u, spec, domain, grid, t);
  const double f0 = sup_norm(f);

  LinearSystem sys;
  sys.rhs = -f;
  try {
    sys.matrix = newton_jacobian(u, t, spec, domain, grid);
    SolveOptions opts;
    opts.method = method;
    ScalarField delta = solve(sys, opts);

    double step = initial_step;
    for (int bt = 0; bt < 30; ++bt) {
      ScalarField candidate = u + step * delta;
      ScalarField fc = residual(candidate, spec, domain, grid, t);
      if (sup_norm(fc) < f0 || step * sup_norm(delta) <= 1e-15) return candidate;
      step *= backtrack;
    }
    // No descent found along the Newton direction; a Picard sweep is the
    // robust alternative.
    return picard_step(u, t, spec, domain, grid, method);
  } catch (const EllipticError&) {
    return picard_step(u, t, spec, domain, grid, method);
  }
}

C0Bounds check_c0_bounds(const ScalarField& u, const CurvatureSpec& spec, double grid_spacing) {
  C0Bounds b;
  b.lo = std::log(spec.r1());
  b.hi = std::log(spec.r2());
  b.tol = 1e-8 + 10.0 * grid_spacing * grid_spacing;
  // Boundary values are zero, inside [log r1, log r2] by r1 <= 1 <= r2.
  b.u_min = u.size() ? std::min(0.0, u.minCoeff()) : 0.0;
  b.u_max = u.size() ? std::max(0.0, u.maxCoeff()) : 0.0;
  b.pass = b.u_min >= b.lo - b.tol && b.u_max <= b.hi + b.tol;
  return b;
}

std::pair<ScalarField, SolveReport> solve_bump(const ChartedDomain& domain,
                                               const CurvatureSpec& spec,
                                               const SolverConfig& config,
                                               const std::optional<ScalarField>& initial) {
  config.validate();
  const auto t_start = Clock::now();

  Grid grid = build_grid(domain);

  SolveReport report;
  report.unknowns = grid.unknown_count();

  ScalarField u = initial.value_or(ScalarField::Zero(grid.unknown_count()));
  if (u.size() != grid.unknown_count())
    throw SolverError("initial field length does not match grid unknowns");

  report.hypotheses = check_hypotheses(spec, domain, HypothesisMode::Weak,
                                       config.hypothesis_q_samples, config.hypothesis_rho_samples);
  if (!report.hypotheses.pass && !config.force) {
    report.status = SolveStatus::HypothesisFail;
    report.total_seconds = seconds_since(t_start);
    return {std::move(u), std::move(report)};
  }

  std::vector<double> eps_list = config.eps_schedule.empty() ? std::vector<double>{0.0}
                                                             : config.eps_schedule;
  const C0Bounds bound_probe = check_c0_bounds(u, spec, domain.grid_spacing());
  report.iterates_in_bounds = bound_probe.pass;

  bool aborted = false;
  for (std::size_t ei = 0; ei < eps_list.size() && !aborted; ++ei) {
    const CurvatureSpec stage_spec = regularize(spec, eps_list[ei]);
    for (std::size_t ti = 0; ti < config.t_schedule.size() && !aborted; ++ti) {
      const double t = config.t_schedule[ti];
      const bool final_stage = (ei + 1 == eps_list.size()) && (ti + 1 == config.t_schedule.size());

      StageRecord stage;
      stage.eps = eps_list[ei];
      stage.t = t;
      const auto stage_t0 = Clock::now();

      double first_residual = -1.0;
      bool stage_done = false;
      for (int it = 0; it < config.max_iterations; ++it) {
        ScalarField f = residual(u, stage_spec, domain, grid, t);
        const double rnorm = sup_norm(f);
        stage.residuals.push_back(rnorm);
        if (first_residual < 0.0) first_residual = rnorm;

        if (!std::isfinite(rnorm) || rnorm > 1e6 * (first_residual + 1e-300)) {
          report.status = SolveStatus::Diverged;
          aborted = true;
          break;
        }
        if (rnorm <= config.tol_residual) {
          stage_done = true;
          break;
        }

        ScalarField next;
        switch (config.scheme) {
          case Scheme::Picard:
            next = picard_step(u, t, stage_spec, domain, grid, config.linear_method);
            break;
          case Scheme::Newton:
            next = newton_step(u, t, stage_spec, domain, grid, config.newton_initial_step,
                               config.newton_backtrack, config.linear_method);
            break;
          case Scheme::PicardThenNewton:
            if (rnorm > 1e-3)
              next = picard_step(u, t, stage_spec, domain, grid, config.linear_method);
            else
              next = newton_step(u, t, stage_spec, domain, grid, config.newton_initial_step,
                                 config.newton_backtrack, config.linear_method);
            break;
        }
        const double increment = sup_norm(next - u);
        u = std::move(next);
        ++stage.iterations;

        const C0Bounds iterate_bounds = check_c0_bounds(u, spec, domain.grid_spacing());
        report.iterates_in_bounds = report.iterates_in_bounds && iterate_bounds.pass;

        if (increment <= config.tol_increment) {
          ScalarField ff = residual(u, stage_spec, domain, grid, t);
          stage.residuals.push_back(sup_norm(ff));
          stage_done = sup_norm(ff) <= config.tol_residual;
          break;
        }
      }

      stage.wall_seconds = seconds_since(stage_t0);
      report.stages.push_back(std::move(stage));
      if (!aborted && final_stage && !stage_done) report.status = SolveStatus::MaxIter;
    }
  }

  // Final diagnostics against the target (eps = 0) equation.
  ScalarField f_final = residual(u, spec, domain, grid, 1.0);
  report.final_residual = sup_norm(f_final);
  if (report.status == SolveStatus::Converged && report.final_residual > config.tol_residual)
    report.status = SolveStatus::MaxIter;

  report.c0 = check_c0_bounds(u, spec, domain.grid_spacing());
  for (int k = 0; k < grid.unknown_count(); ++k)
    report.grad_sup_sq =
        std::max(report.grad_sup_sq, frame_gradient(grid, domain, k, u).squaredNorm());
  report.total_seconds = seconds_since(t_start);
  return {std::move(u), std::move(report)};
}

ProbeReport uniqueness_probe(const ChartedDomain& domain, const CurvatureSpec& spec,
                             const SolverConfig& config, int n_starts, std::uint64_t seed) {
  if (n_starts < 1) throw SolverError("probe needs at least one start");
  Grid grid = build_grid(domain);
  const int unknowns = grid.unknown_count();

  const double lo = std::log(spec.r1()), hi = std::log(spec.r2());

  // Envelope vanishing on the boundary, used to shape the random starts.
  ScalarField envelope(unknowns);
  double env_max = 0.0;
  for (int k = 0; k < unknowns; ++k) {
    envelope(k) = -domain.phi(grid.node(k).x);
    env_max = std::max(env_max, envelope(k));
  }
  if (env_max > 0.0) envelope /= env_max;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);

  std::vector<std::pair<std::string, ScalarField>> starts;
  starts.emplace_back("zero", ScalarField::Zero(unknowns));
  int made = 1;
  int const_count = 0, random_count = 0;
  while (made < n_starts) {
    if (made % 2 == 1) {
      ++const_count;
      double c = lo + (hi - lo) * const_count / 4.0;
      c = std::clamp(c, lo, hi);
      starts.emplace_back("constant_" + std::to_string(const_count),
                          ScalarField::Constant(unknowns, c));
    } else {
      ++random_count;
      ScalarField field(unknowns);
      const double a0 = unif(rng), a1 = unif(rng), a2 = unif(rng);
      const double w1 = 1.0 + 2.0 * std::abs(unif(rng)), w2 = 1.0 + 2.0 * std::abs(unif(rng));
      for (int k = 0; k < unknowns; ++k) {
        const Eigen::VectorXd& x = grid.node(k).x;
        double smooth = a0 + a1 * std::sin(w1 * x(0)) + a2 * std::cos(w2 * x(x.size() - 1));
        double val = envelope(k) * smooth * std::max(std::abs(lo), std::abs(hi));
        field(k) = std::clamp(val, lo, hi);
      }
      starts.emplace_back("random_" + std::to_string(random_count), std::move(field));
    }
    ++made;
  }

  ProbeReport probe;
  probe.seed = seed;
  probe.runs.resize(starts.size());
  parallel_for(static_cast<int>(starts.size()), [&](int i) {
    const auto& [label, u0] = starts[static_cast<std::size_t>(i)];
    auto [u, rep] = solve_bump(domain, spec, config, u0);
    ProbeRun& run = probe.runs[static_cast<std::size_t>(i)];
    run.label = label;
    run.status = rep.status;
    run.in_A = rep.c0.pass;
    run.u_min = rep.c0.u_min;
    run.u_max = rep.c0.u_max;
    run.final_residual = rep.final_residual;
    run.u = std::move(u);
  });
  for (const ProbeRun& run : probe.runs)
    if (run.status == SolveStatus::Converged) ++probe.converged_count;

  // Cluster converged runs by sup distance, then compare the in-A ones.
  const int nr = static_cast<int>(probe.runs.size());
  std::vector<int> cluster_of(static_cast<std::size_t>(nr), -1);
  for (int i = 0; i < nr; ++i) {
    if (probe.runs[static_cast<std::size_t>(i)].status != SolveStatus::Converged) continue;
    bool placed = false;
    for (std::size_t c = 0; c < probe.clusters.size() && !placed; ++c) {
      int repr = probe.clusters[c][0];
      double dist = sup_norm(probe.runs[static_cast<std::size_t>(i)].u -
                             probe.runs[static_cast<std::size_t>(repr)].u);
      if (dist < probe.agreement_threshold) {
        probe.clusters[c].push_back(i);
        cluster_of[static_cast<std::size_t>(i)] = static_cast<int>(c);
        placed = true;
      }
    }
    if (!placed) {
      cluster_of[static_cast<std::size_t>(i)] = static_cast<int>(probe.clusters.size());
      probe.clusters.push_back({i});
    }
  }
  for (const auto& cluster : probe.clusters) {
    bool in_a = true;
    for (int i : cluster) in_a = in_a && probe.runs[static_cast<std::size_t>(i)].in_A;
    probe.cluster_in_A.push_back(in_a);
  }

  probe.max_pairwise_in_A = 0.0;
  for (int i = 0; i < nr; ++i)
    for (int j = i + 1; j < nr; ++j) {
      const ProbeRun& a = probe.runs[static_cast<std::size_t>(i)];
      const ProbeRun& b = probe.runs[static_cast<std::size_t>(j)];
      if (a.status == SolveStatus::Converged && b.status == SolveStatus::Converged && a.in_A &&
          b.in_A)
        probe.max_pairwise_in_A = std::max(probe.max_pairwise_in_A, sup_norm(a.u - b.u));
    }
  return probe;
}

}  // namespace rbump
