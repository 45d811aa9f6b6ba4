#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>

#include "rbump/curvature.hpp"
#include "rbump/geometry.hpp"
#include "rbump/solver.hpp"

namespace rbump {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OutputPaths {
  std::string report_path;
  std::string mesh_path;
  std::string profile_path;
  std::string solution_path;
};

/// A fully resolved run: problem geometry, curvature, solver settings and
/// output destinations. `resolved` carries every field with defaults
/// expanded and is embedded verbatim in reports.
struct RunConfig {
  ChartedDomain domain;
  CurvatureSpec curvature;
  SolverConfig solver;
  OutputPaths outputs;
  std::uint64_t seed;
  nlohmann::json resolved;
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

/// Rebuilds a config with one swept parameter replaced. Supported names:
/// grid_spacing, theta0, epsilon, c, gamma.
RunConfig with_parameter(const RunConfig& base, const std::string& name, double value);

/// Plain-text nodal solution files: a short header (dimension, spacing,
/// unknown count, grid structure hash) followed by one value per line.
void write_solution(const std::string& path, const Grid& grid, const ScalarField& u);

struct SolutionFile {
  int dimension = 0;
  double grid_spacing = 0.0;
  int unknowns = 0;
  std::uint64_t grid_hash = 0;
  ScalarField values;
};

SolutionFile read_solution(const std::string& path);

/// Writes JSON via a temp file and rename so readers never observe a
/// partial report.
void write_json_atomic(const nlohmann::json& j, const std::string& path);

}  // namespace rbump
