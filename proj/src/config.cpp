#include "rbump/config.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace rbump {

namespace {

using nlohmann::json;

std::vector<std::string> chart_variable_names(int n) {
  std::vector<std::string> names;
  for (int i = 1; i <= n; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

std::vector<std::string> ambient_variable_names(int n) {
  std::vector<std::string> names;
  for (int i = 1; i <= n + 1; ++i) names.push_back("q" + std::to_string(i));
  return names;
}

Eigen::VectorXd parse_vector(const json& j, int expect, const std::string& what) {
  if (!j.is_array() || static_cast<int>(j.size()) != expect)
    throw ConfigError(what + " must be an array of " + std::to_string(expect) + " numbers");
  Eigen::VectorXd v(expect);
  for (int i = 0; i < expect; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

// Fritsch-Carlson monotone cubic interpolation for tabulated radial data.
struct Pchip {
  std::vector<double> x, y, d;

  Pchip(std::vector<double> xs, std::vector<double> ys) : x(std::move(xs)), y(std::move(ys)) {
    const std::size_t n = x.size();
    if (n < 2) throw ConfigError("tabulated curvature needs at least two samples");
    for (std::size_t i = 1; i < n; ++i)
      if (x[i] <= x[i - 1]) throw ConfigError("tabulated rho values must be strictly increasing");
    std::vector<double> slope(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) slope[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
    d.assign(n, 0.0);
    d[0] = slope[0];
    d[n - 1] = slope[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (slope[i - 1] * slope[i] <= 0.0) {
        d[i] = 0.0;
      } else {
        const double w1 = 2.0 * (x[i + 1] - x[i]) + (x[i] - x[i - 1]);
        const double w2 = (x[i + 1] - x[i]) + 2.0 * (x[i] - x[i - 1]);
        d[i] = (w1 + w2) / (w1 / slope[i - 1] + w2 / slope[i]);
      }
    }
  }

  double operator()(double t) const {
    std::size_t hi = 1;
    while (hi + 1 < x.size() && x[hi] < t) ++hi;
    const std::size_t lo = hi - 1;
    const double w = x[hi] - x[lo];
    const double s = (t - x[lo]) / w;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
    const double h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s);
    const double h11 = s * s * (s - 1);
    return h00 * y[lo] + h10 * w * d[lo] + h01 * y[hi] + h11 * w * d[hi];
  }
};

CurvatureSpec parse_curvature(const json& jc, int dimension, json& resolved) {
  const std::string family = jc.value("family", std::string());
  const double r1 = jc.value("r1", 1.0);
  const double r2 = jc.value("r2", 1.0);
  const double eps = jc.value("epsilon", 0.0);
  resolved["family"] = family;
  resolved["r1"] = r1;
  resolved["r2"] = r2;
  resolved["epsilon"] = eps;

  if (family == "constant") {
    const double c = jc.value("c", 1.0);
    resolved["c"] = c;
    return CurvatureSpec::constant(c, r1, r2, eps);
  }
  if (family == "radial_power") {
    const double c = jc.value("c", 1.0);
    const double gamma = jc.value("gamma", 1.0);
    resolved["c"] = c;
    resolved["gamma"] = gamma;
    return CurvatureSpec::radial_power(c, gamma, r1, r2, eps);
  }
  if (family == "separable") {
    if (!jc.contains("f") || !jc.contains("g"))
      throw ConfigError("separable curvature needs expressions 'f' (in rho) and 'g' (in q1..qn+1)");
    const std::string fsrc = jc.at("f").get<std::string>();
    const std::string gsrc = jc.at("g").get<std::string>();
    resolved["f"] = fsrc;
    resolved["g"] = gsrc;
    try {
      Expression f = Expression::parse(fsrc, {"rho"});
      Expression g = Expression::parse(gsrc, ambient_variable_names(dimension));
      return CurvatureSpec::separable(std::move(f), std::move(g), r1, r2, eps);
    } catch (const ExpressionError& e) {
      throw ConfigError(std::string("bad curvature expression: ") + e.what());
    }
  }
  if (family == "tabulated") {
    if (!jc.contains("rho") || !jc.contains("H"))
      throw ConfigError("tabulated curvature needs arrays 'rho' and 'H'");
    auto rho = jc.at("rho").get<std::vector<double>>();
    auto hv = jc.at("H").get<std::vector<double>>();
    if (rho.size() != hv.size()) throw ConfigError("'rho' and 'H' must have equal length");
    resolved["rho"] = rho;
    resolved["H"] = hv;
    if (rho.front() > r1 * (1.0 - 1e-3) || rho.back() < r2 * (1.0 + 1e-3))
      throw ConfigError("tabulated samples must cover [r1, r2] with a small margin");
    auto interp = std::make_shared<Pchip>(std::move(rho), std::move(hv));
    auto value = [interp](const Eigen::VectorXd& X) { return (*interp)(X.norm()); };
    return CurvatureSpec::tabulated(value, nullptr, r1, r2, eps);
  }
  throw ConfigError("unknown curvature family '" + family +
                    "' (expected constant | radial_power | separable | tabulated)");
}

Scheme parse_scheme(const std::string& s) {
  if (s == "picard") return Scheme::Picard;
  if (s == "newton") return Scheme::Newton;
  if (s == "picard_then_newton") return Scheme::PicardThenNewton;
  throw ConfigError("unknown scheme '" + s + "'");
}

}  // namespace

RunConfig parse_config(const json& j) {
  try {
    if (!j.contains("problem")) throw ConfigError("missing 'problem' section");
    const json& jp = j.at("problem");
    const int n = jp.value("dimension", 2);
    if (n < 2) throw ConfigError("dimension must be >= 2");

    json resolved;
    resolved["problem"]["dimension"] = n;

    const double h = jp.value("grid_spacing", 0.1);
    resolved["problem"]["grid_spacing"] = h;

    // Domain + pole.
    if (!jp.contains("domain")) throw ConfigError("missing problem.domain");
    const json& jd = jp.at("domain");
    const std::string dtype = jd.value("type", std::string("cap"));

    std::optional<Eigen::VectorXd> pole;
    bool auto_pole = true;
    if (jp.contains("pole") && jp.at("pole").is_array()) {
      pole = parse_vector(jp.at("pole"), n + 1, "pole");
      auto_pole = false;
    }

    std::optional<ChartedDomain> domain;
    if (dtype == "cap") {
      Eigen::VectorXd center;
      if (jd.contains("center")) {
        center = parse_vector(jd.at("center"), n + 1, "cap center");
      } else {
        center = Eigen::VectorXd::Zero(n + 1);
        center(n) = 1.0;
      }
      double theta0;
      if (jd.contains("theta0_degrees"))
        theta0 = jd.at("theta0_degrees").get<double>() * M_PI / 180.0;
      else if (jd.contains("theta0"))
        theta0 = jd.at("theta0").get<double>();
      else
        throw ConfigError("cap domain needs theta0_degrees (or theta0 in radians)");
      domain = ChartedDomain::cap(n, center, theta0, h, pole);
      resolved["problem"]["domain"] = {{"type", "cap"}, {"theta0", theta0}};
      for (int i = 0; i <= n; ++i) resolved["problem"]["domain"]["center"].push_back(center(i));
    } else if (dtype == "level_set") {
      if (!jd.contains("phi") || !jd.contains("bbox"))
        throw ConfigError("level_set domain needs 'phi' and 'bbox'");
      const std::string phisrc = jd.at("phi").get<std::string>();
      const json& jb = jd.at("bbox");
      if (!jb.is_array() || static_cast<int>(jb.size()) != n)
        throw ConfigError("bbox must be an array of n [lo, hi] pairs");
      Eigen::MatrixXd bbox(n, 2);
      for (int i = 0; i < n; ++i) {
        bbox(i, 0) = jb[static_cast<std::size_t>(i)][0].get<double>();
        bbox(i, 1) = jb[static_cast<std::size_t>(i)][1].get<double>();
      }
      Eigen::VectorXd p;
      if (pole) {
        p = *pole;
      } else {
        p = Eigen::VectorXd::Zero(n + 1);
        p(n) = 1.0;
      }
      Expression phi;
      try {
        phi = Expression::parse(phisrc, chart_variable_names(n));
      } catch (const ExpressionError& e) {
        throw ConfigError(std::string("bad level-set expression: ") + e.what());
      }
      domain = ChartedDomain::level_set(n, std::move(phi), bbox, p, h);
      resolved["problem"]["domain"] = {{"type", "level_set"}, {"phi", phisrc}};
      for (int i = 0; i < n; ++i)
        resolved["problem"]["domain"]["bbox"].push_back({bbox(i, 0), bbox(i, 1)});
    } else {
      throw ConfigError("unknown domain type '" + dtype + "'");
    }
    resolved["problem"]["pole"] = json::array();
    for (int i = 0; i <= n; ++i) resolved["problem"]["pole"].push_back(domain->pole()(i));
    resolved["problem"]["pole_mode"] = auto_pole ? "auto_antipodal" : "explicit";

    if (!jp.contains("curvature")) throw ConfigError("missing problem.curvature");
    json resolved_curv;
    CurvatureSpec spec = parse_curvature(jp.at("curvature"), n, resolved_curv);
    resolved["problem"]["curvature"] = resolved_curv;

    // Solver.
    SolverConfig solver;
    if (j.contains("solver")) {
      const json& js = j.at("solver");
      solver.scheme = parse_scheme(js.value("scheme", std::string("picard_then_newton")));
      if (js.contains("t_schedule")) solver.t_schedule = js.at("t_schedule").get<std::vector<double>>();
      if (js.contains("eps_schedule"))
        solver.eps_schedule = js.at("eps_schedule").get<std::vector<double>>();
      solver.tol_residual = js.value("tol_residual", solver.tol_residual);
      solver.tol_increment = js.value("tol_increment", solver.tol_increment);
      solver.max_iterations = js.value("max_iterations", solver.max_iterations);
      if (js.contains("newton_damping")) {
        const json& jn = js.at("newton_damping");
        if (!jn.is_array() || jn.size() != 2)
          throw ConfigError("newton_damping must be [initial_step, backtrack_factor]");
        solver.newton_initial_step = jn[0].get<double>();
        solver.newton_backtrack = jn[1].get<double>();
      }
      const std::string lm = js.value("linear_method", std::string("direct"));
      if (lm == "direct")
        solver.linear_method = LinearMethod::Direct;
      else if (lm == "krylov")
        solver.linear_method = LinearMethod::Krylov;
      else
        throw ConfigError("linear_method must be direct | krylov");
      solver.force = js.value("force", false);
    }
    try {
      solver.validate();
    } catch (const SolverError& e) {
      throw ConfigError(std::string("bad solver settings: ") + e.what());
    }
    resolved["solver"] = {
        {"scheme", to_string(solver.scheme)},
        {"t_schedule", solver.t_schedule},
        {"eps_schedule", solver.eps_schedule},
        {"tol_residual", solver.tol_residual},
        {"tol_increment", solver.tol_increment},
        {"max_iterations", solver.max_iterations},
        {"newton_damping", {solver.newton_initial_step, solver.newton_backtrack}},
        {"linear_method", solver.linear_method == LinearMethod::Direct ? "direct" : "krylov"},
        {"force", solver.force},
    };

    OutputPaths outputs;
    if (j.contains("outputs")) {
      const json& jo = j.at("outputs");
      outputs.report_path = jo.value("report_path", std::string());
      outputs.mesh_path = jo.value("mesh_path", std::string());
      outputs.profile_path = jo.value("profile_path", std::string());
      outputs.solution_path = jo.value("solution_path", std::string());
    }
    resolved["outputs"] = {{"report_path", outputs.report_path},
                           {"mesh_path", outputs.mesh_path},
                           {"profile_path", outputs.profile_path},
                           {"solution_path", outputs.solution_path}};

    const std::uint64_t seed = j.value("seed", 20240101ull);
    resolved["seed"] = seed;

    return RunConfig{std::move(*domain), std::move(spec), std::move(solver), std::move(outputs),
                     seed, std::move(resolved)};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("bad domain: ") + e.what());
  } catch (const CurvatureError& e) {
    throw ConfigError(std::string("bad curvature: ") + e.what());
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

RunConfig with_parameter(const RunConfig& base, const std::string& name, double value) {
  json j = base.resolved;
  // Rebuild from the resolved form so every other field carries over.
  json in;
  in["problem"] = j["problem"];
  in["solver"] = j["solver"];
  in["outputs"] = j["outputs"];
  in["seed"] = j["seed"];
  if (name == "grid_spacing") {
    in["problem"]["grid_spacing"] = value;
  } else if (name == "theta0") {
    if (in["problem"]["domain"]["type"] != "cap")
      throw ConfigError("theta0 sweep requires a cap domain");
    in["problem"]["domain"]["theta0"] = value;
    in["problem"]["domain"].erase("theta0_degrees");
  } else if (name == "epsilon") {
    in["problem"]["curvature"]["epsilon"] = value;
    in["solver"]["eps_schedule"] = json::array();  // direct solve at this epsilon
  } else if (name == "c" || name == "gamma") {
    if (!in["problem"]["curvature"].contains(name))
      throw ConfigError("curvature family has no parameter '" + name + "'");
    in["problem"]["curvature"][name] = value;
  } else {
    throw ConfigError("unknown sweep parameter '" + name +
                      "' (grid_spacing | theta0 | epsilon | c | gamma)");
  }
  if (in["problem"]["pole_mode"] == "auto_antipodal") in["problem"].erase("pole");
  in["problem"].erase("pole_mode");
  return parse_config(in);
}

void write_solution(const std::string& path, const Grid& grid, const ScalarField& u) {
  if (u.size() != grid.unknown_count())
    throw ConfigError("solution length does not match grid unknowns");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  char buf[160];
  out << "# radial-bump solution\n";
  out << "# dimension " << grid.dimension() << "\n";
  std::snprintf(buf, sizeof(buf), "# grid_spacing %.17g\n", grid.spacing());
  out << buf;
  out << "# unknowns " << grid.unknown_count() << "\n";
  std::snprintf(buf, sizeof(buf), "# grid_hash %016" PRIx64 "\n", grid.structure_hash());
  out << buf;
  for (int k = 0; k < u.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", u(k));
    out << buf;
  }
  if (!out.good()) throw ConfigError("write failure on '" + path + "'");
}

SolutionFile read_solution(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open solution '" + path + "'");
  SolutionFile sol;
  std::string line;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string key;
      ss >> key;
      if (key == "dimension")
        ss >> sol.dimension;
      else if (key == "grid_spacing")
        ss >> sol.grid_spacing;
      else if (key == "unknowns")
        ss >> sol.unknowns;
      else if (key == "grid_hash")
        ss >> std::hex >> sol.grid_hash >> std::dec;
      continue;
    }
    try {
      values.push_back(std::stod(line));
    } catch (const std::exception&) {
      throw ConfigError("bad value line in solution file: '" + line + "'");
    }
  }
  sol.values = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  return sol;
}

void write_json_atomic(const nlohmann::json& j, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw ConfigError("cannot open '" + tmp + "' for writing");
    out << j.dump(2) << '\n';
    if (!out.good()) throw ConfigError("write failure on '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace rbump
