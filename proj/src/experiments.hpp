#pragma once

#include "config.hpp"

#include <string>
#include <vector>

namespace shapeinv::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Outcome of one experiment run: informational notes plus the verdict of the
/// experiment's built-in assertions (exit code 4 when they fail).
struct RunSummary {
  bool assertions_ok = true;
  std::vector<std::string> notes;
};

void write_manifest(const ExperimentConfig& config, const std::string& out_dir,
                    const std::string& subcommand);

RunSummary run_forward(const ExperimentConfig& config, const std::string& out_dir);
RunSummary run_gradient_check(const ExperimentConfig& config, const std::string& out_dir);
RunSummary run_hessian_spectrum(const ExperimentConfig& config, const std::string& out_dir);
RunSummary run_reconstruct(const ExperimentConfig& config, const std::string& out_dir);
RunSummary run_eta_sweep(const ExperimentConfig& config, const std::string& out_dir);
RunSummary run_stability_study(const ExperimentConfig& config, const std::string& out_dir);

}  // namespace shapeinv::cli
