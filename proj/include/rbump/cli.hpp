#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rbump/config.hpp"

namespace rbump {

/// Exit codes shared by all subcommands:
///   0 success, 1 hypothesis failure, 2 config/usage error,
///   3 non-convergence, 4 verification failure.
struct CmdOptions {
  std::string config_path;
  std::string out_path;       // overrides outputs.report_path when nonempty
  std::string solution_file;  // verify: stored nodal values
  std::string param;          // sweep parameter name
  std::vector<double> values; // sweep values
  int starts = 5;             // probe start count
  std::optional<std::uint64_t> seed;
};

int cmd_validate(const CmdOptions& opts);
int cmd_solve(const CmdOptions& opts);
int cmd_verify(const CmdOptions& opts);
int cmd_sweep(const CmdOptions& opts);
int cmd_probe(const CmdOptions& opts);

}  // namespace rbump
