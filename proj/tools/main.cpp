#include <CLI11.hpp>

#include <cstdint>
#include <sstream>
#include <string>

#include "rbump/cli.hpp"

namespace {

std::vector<double> parse_csv(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radial-bump: prescribed-mean-curvature radial graphs over sphere domains"};
  app.require_subcommand(1);

  rbump::CmdOptions opts;
  std::string values_csv;
  std::int64_t seed = -1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "JSON run configuration")->required();
    sub->add_option("--out", opts.out_path, "report path (overrides config outputs.report_path)");
  };

  CLI::App* validate = app.add_subcommand("validate", "check hypotheses and grid diagnostics");
  add_common(validate);

  CLI::App* solve = app.add_subcommand("solve", "solve the Dirichlet problem and verify");
  add_common(solve);

  CLI::App* verify = app.add_subcommand("verify", "check a stored solution without solving");
  add_common(verify);
  verify->add_option("--solution", opts.solution_file, "stored nodal solution file")->required();

  CLI::App* sweep = app.add_subcommand("sweep", "solve across one swept parameter");
  add_common(sweep);
  sweep->add_option("--param", opts.param, "grid_spacing | theta0 | epsilon | c | gamma")
      ->required();
  sweep->add_option("--values", values_csv, "comma-separated parameter values")->required();

  CLI::App* probe = app.add_subcommand("probe", "multi-start uniqueness probe");
  add_common(probe);
  probe->add_option("--starts", opts.starts, "number of initial fields (default 5)");
  probe->add_option("--seed", seed, "seed for the random starts (default from config)");

  CLI11_PARSE(app, argc, argv);

  if (seed >= 0) opts.seed = static_cast<std::uint64_t>(seed);
  if (!values_csv.empty()) {
    try {
      opts.values = parse_csv(values_csv);
    } catch (const std::exception&) {
      std::fprintf(stderr, "bad --values list: '%s'\n", values_csv.c_str());
      return 2;
    }
  }

  if (validate->parsed()) return rbump::cmd_validate(opts);
  if (solve->parsed()) return rbump::cmd_solve(opts);
  if (verify->parsed()) return rbump::cmd_verify(opts);
  if (sweep->parsed()) return rbump::cmd_sweep(opts);
  if (probe->parsed()) return rbump::cmd_probe(opts);
  return 2;
}
