// Command-line driver:
//   fraqmap <experiment> [--config file.json] [--key=value ...] --out DIR [--vtk]
// Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 failed acceptance check.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fraqmap/experiment.hpp"

namespace {

constexpr int exit_config = 2;
constexpr int exit_solver = 3;

std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    fraqmap::require(arg.rfind("--", 0) == 0 && arg.size() > 2, "unexpected argument '", arg, "'");
    const auto eq = arg.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(arg.substr(2, eq - 2), arg.substr(eq + 1));
    } else {
      fraqmap::require(i + 1 < extras.size(), "option '", arg, "' needs a value");
      out.emplace_back(arg.substr(2), extras[++i]);
    }
  }
  return out;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fractional harmonic maps: spin dynamics, heat flow, and assembly checks"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir;
  bool vtk = false;
  for (const auto& name : fraqmap::experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "flat JSON configuration file");
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_flag("--vtk", vtk, "also write legacy VTK snapshots");
    sub->allow_extras();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_config;
  }
  CLI::App* sub = app.get_subcommands().front();
  const std::string experiment = sub->get_name();

  fraqmap::Json resolved;
  std::filesystem::path base;
  try {
    fraqmap::Json file;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      fraqmap::require(in.good(), "cannot open config file ", config_path);
      file = fraqmap::Json::parse(in, nullptr, false);
      fraqmap::require(!file.is_discarded(), "config file ", config_path, " is not valid JSON");
      base = std::filesystem::path(config_path).parent_path();
    }
    resolved = fraqmap::resolve_config(experiment, file, parse_overrides(sub->remaining()));
  } catch (const fraqmap::Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  }

  try {
    return fraqmap::run_experiment(resolved, out_dir, vtk, base).exit_code;
  } catch (const fraqmap::SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return exit_solver;
  } catch (const fraqmap::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return exit_solver;
  }
}
