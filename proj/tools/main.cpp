#include "config.hpp"
#include "experiments.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kSolverFailure = 3,
  kAssertionFailure = 4,
};

using Runner = std::function<shapeinv::cli::RunSummary(const shapeinv::cli::ExperimentConfig&,
                                                       const std::string&)>;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse obstacle reconstruction by regularized shape optimization"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  const std::map<std::string, std::pair<std::string, Runner>> experiments = {
      {"forward",
       {"solve the state problem on the configured shape", shapeinv::cli::run_forward}},
      {"gradient-check",
       {"compare the adjoint shape gradient against finite differences",
        shapeinv::cli::run_gradient_check}},
      {"hessian-spectrum",
       {"assemble the shape Hessian at a near-critical shape and report its spectrum",
        shapeinv::cli::run_hessian_spectrum}},
      {"reconstruct",
       {"reconstruct the obstacle from synthetic Cauchy data", shapeinv::cli::run_reconstruct}},
      {"eta-sweep",
       {"reconstructions for a halving sequence of perimeter weights",
        shapeinv::cli::run_eta_sweep}},
      {"stability-study",
       {"noise ensemble comparing regularized and unregularized reconstructions",
        shapeinv::cli::run_stability_study}},
  };

  struct SubState {
    CLI::App* sub = nullptr;
    std::string config_path;
    std::string out_dir;
    int jobs = 0;
  };
  std::map<std::string, SubState> states;
  for (const auto& [name, entry] : experiments) {
    auto& state = states[name];
    state.sub = app.add_subcommand(name, entry.first);
    state.sub->add_option("--config", state.config_path, "configuration file (key = value lines)");
    state.sub->add_option("--out", state.out_dir, "output directory");
    state.sub->add_option("--jobs", state.jobs, "worker threads for sweep subcommands");
    state.sub->allow_extras();  // remaining --key value tokens override config keys
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  for (const auto& [name, entry] : experiments) {
    const auto& state = states.at(name);
    if (!state.sub->parsed()) continue;
    try {
      auto config = shapeinv::cli::build_config(state.config_path, state.sub->remaining());
      if (!state.out_dir.empty()) config.out = state.out_dir;
      if (state.jobs > 0) config.jobs = state.jobs;
      config.validate();

      const auto summary = entry.second(config, config.out);
      for (const auto& note : summary.notes) std::printf("%s\n", note.c_str());
      if (!summary.assertions_ok) {
        std::printf("assertions: FAIL\n");
        return kAssertionFailure;
      }
      std::printf("assertions: ok\n");
      return kOk;
    } catch (const shapeinv::cli::ConfigError& e) {
      std::fprintf(stderr, "config error: %s\n", e.what());
      return kConfigError;
    } catch (const std::invalid_argument& e) {
      std::fprintf(stderr, "config error: %s\n", e.what());
      return kConfigError;
    } catch (const shapeinv::SolveFailure& e) {
      std::fprintf(stderr, "solver failure: %s\n", e.what());
      return kSolverFailure;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return kSolverFailure;
    }
  }
  return kConfigError;
}
