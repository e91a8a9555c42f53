#pragma once

#include "shapeinv/functionals.hpp"
#include "shapeinv/geometry.hpp"
#include "shapeinv/optimize.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace shapeinv::cli {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Resolved experiment configuration: defaults, then config-file entries, then
/// command-line overrides, applied in that order. Every key of the line-based
/// config file can also be given as a --key value flag.
struct ExperimentConfig {
  // hold-all geometry
  double R_Omega = 1.0;
  double R_K = 0.8;
  double r_min = 0.1;

  // shape parametrization
  int K_max = 16;
  RadialShape<double> true_shape = make_circle(0.5, 16);
  RadialShape<double> init_shape = make_circle(0.45, 16);
  bool init_shape_given = false;

  // Cauchy data
  int g_N_mode = 0;  // Neumann datum cos(mode * theta); mode 0 is the constant 1
  double noise_level = 0.0;
  std::uint64_t seed = 1;
  int fine_factor = 2;
  int N_theta = 256;
  std::string data_mode = "fine";  // "fine" avoids the inverse crime; "same" commits it

  // reconstruction mesh
  int n_radial = 32;
  int n_angular = 128;
  double grading = 1.0;

  // optimizer
  double eta = 0.0;
  int max_iters = 300;
  double armijo_slope = 1e-4;
  double backtrack = 0.5;
  double initial_step = 1.0;
  double grad_tol = 1e-8;
  int K_active = 16;
  double epsilon_cone = 0.0;  // 0 disables the cone constraint
  bool mode_schedule = false;

  // experiment grids
  double eta0 = 1e-2;
  int eta_steps = 6;
  std::vector<double> hessian_eta_list = {0.0, 1e-4, 1e-3, 1e-2};
  std::vector<double> norm_exponents = {0.0, 1.0};
  std::vector<double> noise_list = {0.005, 0.01, 0.02};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<double> epsilon_list;
  std::vector<double> fd_steps = {1e-3, 1e-4, 1e-5};
  int k_basis = 8;

  // output
  std::string out = "out";
  int jobs = 1;

  HoldAll<double> domain() const { return {R_Omega, R_K, r_min}; }
  MeshParams<double> mesh_params() const { return {n_radial, n_angular, grading, 0.0}; }
  BoundaryField<double> neumann_datum() const;
  RadialShape<double> initial_shape() const;
  CauchyData<double> make_data() const;
  OptimizerConfig<double> optimizer() const;

  void validate() const;

  /// Canonical key = value dump of every resolved entry.
  std::string serialize() const;

  /// FNV-1a hash of the canonical serialization.
  std::uint64_t hash() const;
};

/// Parse "key = value" pairs (also "key value"); '#' starts a comment.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text,
                                                                   const std::string& origin);

std::vector<std::pair<std::string, std::string>> parse_config_file(const std::string& path);

/// Interpret remaining command-line tokens as --key value / --key=value pairs.
std::vector<std::pair<std::string, std::string>> parse_override_flags(
    const std::vector<std::string>& tokens);

/// Apply entries in order on top of the current state; throws ConfigError on
/// unknown keys or malformed values (message carries the offending location).
void apply_entries(ExperimentConfig& config,
                   const std::vector<std::pair<std::string, std::string>>& entries);

ExperimentConfig build_config(const std::string& config_path,
                              const std::vector<std::string>& override_tokens);

}  // namespace shapeinv::cli
