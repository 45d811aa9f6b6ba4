#include "rbump/cli.hpp"

#include <cmath>
#include <iostream>

#include "rbump/elliptic.hpp"
#include "rbump/parallel.hpp"
#include "rbump/surface.hpp"

namespace rbump {

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitHypothesis = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNoConvergence = 3;
constexpr int kExitVerification = 4;

constexpr double kVerifyResidualFactor = 20.0;  // interior residual <= factor * h^2
constexpr double kMatchFactor = 10.0;           // curvature mismatch <= factor * h^2

json hypotheses_json(const HypothesisReport& r) {
  json j;
  j["mode"] = r.mode == HypothesisMode::Weak ? "weak" : "strict";
  j["pass"] = r.pass;
  j["positivity_ok"] = r.positivity_ok;
  j["barrier_r1_margin"] = r.barrier_r1_margin;
  j["barrier_r2_margin"] = r.barrier_r2_margin;
  j["monotonicity_vacuous"] = r.monotonicity_vacuous;
  if (!r.monotonicity_vacuous) j["monotonicity_margin"] = r.monotonicity_margin;
  j["min_H"] = r.min_H;
  j["q_samples"] = r.q_samples;
  j["rho_samples"] = r.rho_samples;
  return j;
}

json c0_json(const C0Bounds& b) {
  return json{{"u_min", b.u_min}, {"u_max", b.u_max},      {"log_r1", b.lo},
              {"log_r2", b.hi},   {"tolerance", b.tol},    {"pass", b.pass}};
}

json solve_report_json(const SolveReport& r) {
  json j;
  j["status"] = to_string(r.status);
  j["unknowns"] = r.unknowns;
  j["final_residual"] = r.final_residual;
  j["c0_bounds"] = c0_json(r.c0);
  j["grad_sup_sq"] = r.grad_sup_sq;
  j["iterates_in_bounds"] = r.iterates_in_bounds;
  j["hypotheses"] = hypotheses_json(r.hypotheses);
  j["stages"] = json::array();
  for (const StageRecord& s : r.stages) {
    json js;
    js["eps"] = s.eps;
    js["t"] = s.t;
    js["iterations"] = s.iterations;
    js["residuals"] = s.residuals;
    js["wall_seconds"] = s.wall_seconds;
    j["stages"].push_back(std::move(js));
  }
  j["timing"]["total_seconds"] = r.total_seconds;
  return j;
}

json ellipticity_json(const EllipticityReport& r) {
  return json{{"lower_margin", r.lower_margin},   {"upper_margin", r.upper_margin},
              {"identity_error", r.identity_error}, {"grad_sup_sq", r.grad_sup_sq},
              {"samples", r.samples},             {"pass", r.pass}};
}

json match_json(const CurvatureMatchReport& r) {
  return json{{"sup_mismatch", r.sup_mismatch},
              {"threshold", r.threshold},
              {"nodes_checked", r.nodes_checked},
              {"pass", r.pass}};
}

void emit_report(const json& j, const CmdOptions& opts, const std::string& config_path) {
  std::string path = opts.out_path;
  if (path.empty()) path = config_path;
  if (path.empty()) {
    std::cout << j.dump(2) << std::endl;
  } else {
    write_json_atomic(j, path);
  }
}

int exit_for_status(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return kExitOk;
    case SolveStatus::HypothesisFail: return kExitHypothesis;
    case SolveStatus::MaxIter:
    case SolveStatus::Diverged: return kExitNoConvergence;
  }
  return kExitNoConvergence;
}

/// Radial profile of H for cap+radial problems: H as a function of rho only.
std::optional<std::function<double(double)>> radial_curvature(const RunConfig& cfg) {
  if (!cfg.domain.is_cap()) return std::nullopt;
  const auto& base = cfg.curvature.base();
  const bool radial = std::holds_alternative<ConstantCurvature>(base) ||
                      std::holds_alternative<RadialPowerCurvature>(base) ||
                      std::holds_alternative<TabulatedCurvature>(base);
  if (!radial) return std::nullopt;
  const Eigen::VectorXd axis = cfg.domain.cap_shape().center;
  const CurvatureSpec spec = cfg.curvature;
  return [spec, axis](double rho) { return spec.evaluate(axis, rho); };
}

/// sup-residual over interior nodes with a complete lattice box (the
/// boundary-adjacent stencils are first-order by design and are reported
/// separately).
std::pair<double, double> split_residual(const ScalarField& f, const Grid& grid) {
  double interior = 0.0, boundary_layer = 0.0;
  for (int k = 0; k < grid.unknown_count(); ++k) {
    const double v = std::abs(f(k));
    if (grid.node(k).cls == NodeClass::Interior && grid.has_full_box(k))
      interior = std::max(interior, v);
    else
      boundary_layer = std::max(boundary_layer, v);
  }
  return {interior, boundary_layer};
}

struct SolveArtifacts {
  ScalarField u;
  SolveReport report;
  Grid grid;
  json report_json;
  int exit_code = kExitOk;
};

SolveArtifacts run_solve(const RunConfig& cfg) {
  SolveArtifacts art{ScalarField(), SolveReport(), build_grid(cfg.domain), json(), kExitOk};
  auto [u, rep] = solve_bump(cfg.domain, cfg.curvature, cfg.solver);
  art.u = std::move(u);
  art.report = std::move(rep);

  json j;
  j["command"] = "solve";
  j["config"] = cfg.resolved;
  j["solve"] = solve_report_json(art.report);

  int code = exit_for_status(art.report.status);
  if (art.report.status == SolveStatus::Converged) {
    EllipticityReport ell =
        ellipticity_check(art.u, cfg.domain, art.grid, 10000, cfg.seed);
    CurvatureMatchReport match =
        curvature_match(art.u, cfg.curvature, cfg.domain, art.grid, kMatchFactor);
    j["ellipticity"] = ellipticity_json(ell);
    j["curvature_match"] = match_json(match);
    const bool verified = ell.pass && match.pass && art.report.c0.pass;
    j["verified"] = verified;
    if (!verified) code = kExitVerification;
  }
  art.report_json = std::move(j);
  art.exit_code = code;
  return art;
}

}  // namespace

int cmd_validate(const CmdOptions& opts) {
  try {
    RunConfig cfg = load_config(opts.config_path);
    json j;
    j["command"] = "validate";
    j["config"] = cfg.resolved;

    HypothesisReport weak = check_hypotheses(cfg.curvature, cfg.domain, HypothesisMode::Weak);
    HypothesisReport strict = check_hypotheses(cfg.curvature, cfg.domain, HypothesisMode::Strict);
    StructureConstants tw = tw_constants(cfg.curvature, cfg.domain);
    j["weak"] = hypotheses_json(weak);
    j["strict"] = hypotheses_json(strict);
    j["tw_constants"] = {{"C1", tw.c1}, {"C2", tw.c2}, {"C3", tw.c3}};

    try {
      Grid grid = build_grid(cfg.domain);
      double sigma_min = 1.0;
      for (int k = 0; k < grid.unknown_count(); ++k)
        for (int d = 0; d < grid.dimension(); ++d)
          for (int s = 0; s < 2; ++s)
            sigma_min = std::min(sigma_min, grid.node(k).arms[static_cast<std::size_t>(d)][static_cast<std::size_t>(s)].sigma);
      j["grid"] = {{"unknowns", grid.unknown_count()},
                   {"interior", grid.interior_count()},
                   {"irregular", grid.unknown_count() - grid.interior_count()},
                   {"sigma_min", sigma_min},
                   {"structure_hash", grid.structure_hash()}};
    } catch (const GridError& e) {
      j["grid"] = {{"error", e.what()}};
    }

    emit_report(j, opts, cfg.outputs.report_path);
    return weak.pass ? kExitOk : kExitHypothesis;
  } catch (const std::exception& e) {
    std::cerr << "validate: " << e.what() << std::endl;
    return kExitConfig;
  }
}

int cmd_solve(const CmdOptions& opts) {
  std::optional<RunConfig> parsed;
  try {
    parsed = load_config(opts.config_path);
  } catch (const std::exception& e) {
    std::cerr << "solve: " << e.what() << std::endl;
    return kExitConfig;
  }
  const RunConfig& cfg = *parsed;
  try {
    SolveArtifacts art = run_solve(cfg);

    if (!cfg.outputs.solution_path.empty())
      write_solution(cfg.outputs.solution_path, art.grid, art.u);
    if (!cfg.outputs.mesh_path.empty()) {
      SurfaceMesh mesh = build_surface(art.u, cfg.domain, art.grid);
      export_mesh(mesh, cfg.outputs.mesh_path);
    }
    if (!cfg.outputs.profile_path.empty()) {
      auto f = radial_curvature(cfg);
      if (!f)
        throw ConfigError("profile output requires a cap domain with radial curvature");
      const double lo = std::log(cfg.curvature.r1()) - 1.0;
      const double hi = std::log(cfg.curvature.r2()) + 1.0;
      RadialProfile profile = radial_ode_reference(cfg.domain.cap_shape().theta0, *f,
                                                   cfg.domain.dimension(), 1e-10, lo, hi);
      write_profile(profile, cfg.outputs.profile_path);
      art.report_json["profile"] = {{"center_value", profile.center_value},
                                    {"roots_found", profile.all_center_values.size()}};
    }

    emit_report(art.report_json, opts, cfg.outputs.report_path);
    return art.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "solve: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "solve: " << e.what() << std::endl;
    return kExitNoConvergence;
  }
}

int cmd_verify(const CmdOptions& opts) {
  std::optional<RunConfig> parsed;
  try {
    parsed = load_config(opts.config_path);
  } catch (const std::exception& e) {
    std::cerr << "verify: " << e.what() << std::endl;
    return kExitConfig;
  }
  const RunConfig& cfg = *parsed;
  try {
    Grid grid = build_grid(cfg.domain);

    SolutionFile sol = read_solution(opts.solution_file);
    if (sol.dimension != grid.dimension() || sol.unknowns != grid.unknown_count() ||
        sol.grid_hash != grid.structure_hash() || sol.values.size() != grid.unknown_count()) {
      std::cerr << "verify: solution file does not match the config grid" << std::endl;
      return kExitConfig;
    }
    if (!sol.values.allFinite()) {
      std::cerr << "verify: non-finite values in solution file" << std::endl;
      return kExitVerification;
    }

    ScalarField f = residual(sol.values, cfg.curvature, cfg.domain, grid, 1.0);
    auto [res_interior, res_boundary] = split_residual(f, grid);
    const double h = grid.spacing();
    const double res_threshold = kVerifyResidualFactor * h * h;

    CurvatureMatchReport match =
        curvature_match(sol.values, cfg.curvature, cfg.domain, grid, kMatchFactor);
    C0Bounds c0 = check_c0_bounds(sol.values, cfg.curvature, h);

    json j;
    j["command"] = "verify";
    j["config"] = cfg.resolved;
    j["residual"] = {{"interior_sup", res_interior},
                     {"boundary_layer_sup", res_boundary},
                     {"threshold", res_threshold},
                     {"pass", res_interior <= res_threshold}};
    j["curvature_match"] = match_json(match);
    j["c0_bounds"] = c0_json(c0);
    const bool pass = res_interior <= res_threshold && match.pass && c0.pass;
    j["verified"] = pass;
    emit_report(j, opts, cfg.outputs.report_path);
    return pass ? kExitOk : kExitVerification;
  } catch (const ConfigError& e) {
    std::cerr << "verify: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "verify: " << e.what() << std::endl;
    return kExitVerification;
  }
}

int cmd_sweep(const CmdOptions& opts) {
  try {
    RunConfig base = load_config(opts.config_path);
    if (opts.param.empty() || opts.values.empty()) {
      std::cerr << "sweep: --param and --values are required" << std::endl;
      return kExitConfig;
    }

    const int count = static_cast<int>(opts.values.size());
    std::vector<RunConfig> children;
    children.reserve(static_cast<std::size_t>(count));
    for (double v : opts.values) children.push_back(with_parameter(base, opts.param, v));

    std::vector<SolveArtifacts> results(static_cast<std::size_t>(count));
    std::vector<std::string> errors(static_cast<std::size_t>(count));
    parallel_for(count, [&](int i) {
      try {
        results[static_cast<std::size_t>(i)] = run_solve(children[static_cast<std::size_t>(i)]);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(i)] = e.what();
      }
    });

    json j;
    j["command"] = "sweep";
    j["parameter"] = opts.param;
    j["values"] = opts.values;
    j["config"] = base.resolved;
    j["children"] = json::array();

    // Oracle errors: distance to the radial ODE reference where available.
    auto fbase = radial_curvature(base);
    std::vector<double> oracle_errors(static_cast<std::size_t>(count),
                                      std::numeric_limits<double>::quiet_NaN());

    // Epsilon sweeps also get the distance to the direct eps = 0 solution.
    std::optional<ScalarField> eps_reference;
    if (opts.param == "epsilon") {
      RunConfig ref_cfg = with_parameter(base, "epsilon", 0.0);
      SolveArtifacts ref = run_solve(ref_cfg);
      if (ref.report.status == SolveStatus::Converged) eps_reference = std::move(ref.u);
    }

    int worst = kExitOk;
    for (int i = 0; i < count; ++i) {
      json child;
      child["value"] = opts.values[static_cast<std::size_t>(i)];
      if (!errors[static_cast<std::size_t>(i)].empty()) {
        child["error"] = errors[static_cast<std::size_t>(i)];
        worst = std::max(worst, kExitNoConvergence);
        j["children"].push_back(std::move(child));
        continue;
      }
      SolveArtifacts& art = results[static_cast<std::size_t>(i)];
      child["report"] = art.report_json;
      worst = std::max(worst, art.exit_code);

      if (fbase && art.report.status == SolveStatus::Converged) {
        const RunConfig& cc = children[static_cast<std::size_t>(i)];
        auto fc = radial_curvature(cc);
        const double lo = std::log(cc.curvature.r1()) - 1.0;
        const double hi = std::log(cc.curvature.r2()) + 1.0;
        std::vector<double> angles;
        angles.reserve(static_cast<std::size_t>(cc.domain.dimension() == 2 ? art.grid.unknown_count() : 0));
        for (int k = 0; k < art.grid.unknown_count(); ++k)
          angles.push_back(cc.domain.cap_colatitude(art.grid.node(k).x));
        try {
          RadialProfile ode = radial_ode_reference(cc.domain.cap_shape().theta0, *fc,
                                                   cc.domain.dimension(), 1e-10, lo, hi, angles);
          double err = 0.0;
          for (int k = 0; k < art.grid.unknown_count(); ++k)
            err = std::max(err, std::abs(art.u(k) - ode.eval(angles[static_cast<std::size_t>(k)])));
          oracle_errors[static_cast<std::size_t>(i)] = err;
          child["oracle_error"] = err;
        } catch (const SurfaceError& e) {
          child["oracle_error_unavailable"] = e.what();
        }
      }
      if (eps_reference && art.report.status == SolveStatus::Converged &&
          art.u.size() == eps_reference->size())
        child["distance_to_eps0"] = (art.u - *eps_reference).lpNorm<Eigen::Infinity>();

      j["children"].push_back(std::move(child));
    }

    if (opts.param == "grid_spacing") {
      json orders = json::array();
      for (int i = 0; i + 1 < count; ++i) {
        const double e0 = oracle_errors[static_cast<std::size_t>(i)];
        const double e1 = oracle_errors[static_cast<std::size_t>(i + 1)];
        const double h0 = opts.values[static_cast<std::size_t>(i)];
        const double h1 = opts.values[static_cast<std::size_t>(i + 1)];
        if (std::isfinite(e0) && std::isfinite(e1) && e1 > 0.0)
          orders.push_back(std::log(e0 / e1) / std::log(h0 / h1));
        else
          orders.push_back(nullptr);
      }
      j["observed_orders"] = orders;
    }

    emit_report(j, opts, base.outputs.report_path);
    return worst;
  } catch (const std::exception& e) {
    std::cerr << "sweep: " << e.what() << std::endl;
    return kExitConfig;
  }
}

int cmd_probe(const CmdOptions& opts) {
  try {
    RunConfig cfg = load_config(opts.config_path);
    if (opts.starts < 1) {
      std::cerr << "probe: need at least one start" << std::endl;
      return kExitConfig;
    }
    const std::uint64_t seed = opts.seed.value_or(cfg.seed);
    ProbeReport probe = uniqueness_probe(cfg.domain, cfg.curvature, cfg.solver, opts.starts, seed);

    json j;
    j["command"] = "probe";
    j["config"] = cfg.resolved;
    j["seed"] = seed;
    j["n_starts"] = opts.starts;
    j["agreement_threshold"] = probe.agreement_threshold;
    j["max_pairwise_in_A"] = probe.max_pairwise_in_A;
    j["converged"] = probe.converged_count;
    j["runs"] = json::array();
    for (const ProbeRun& run : probe.runs)
      j["runs"].push_back({{"label", run.label},
                           {"status", to_string(run.status)},
                           {"in_A", run.in_A},
                           {"u_min", run.u_min},
                           {"u_max", run.u_max},
                           {"final_residual", run.final_residual}});
    j["clusters"] = json::array();
    for (std::size_t c = 0; c < probe.clusters.size(); ++c)
      j["clusters"].push_back({{"runs", probe.clusters[c]}, {"in_A", probe.cluster_in_A[c]}});

    emit_report(j, opts, cfg.outputs.report_path);
    if (probe.converged_count == 0) return kExitNoConvergence;
    return probe.max_pairwise_in_A < probe.agreement_threshold ? kExitOk : kExitVerification;
  } catch (const ConfigError& e) {
    std::cerr << "probe: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "probe: " << e.what() << std::endl;
    return kExitNoConvergence;
  }
}

}  // namespace rbump
