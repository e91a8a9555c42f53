#include "experiments.hpp"

#include "parallel.hpp"
#include "shapeinv/bessel.hpp"
#include "shapeinv/io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace shapeinv::cli {

namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream os(dir + "/" + name);
  if (!os) throw std::runtime_error("cannot write " + dir + "/" + name);
  return os;
}

std::string hex_hash(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Tail index from which the sequence keeps (weakly) decreasing to the end.
std::size_t decreasing_tail_start(const std::vector<double>& v, double slack = 1.05) {
  std::size_t start = v.size() ? v.size() - 1 : 0;
  while (start > 0 && v[start] <= v[start - 1] * slack) --start;
  return start;
}

OptimizationTrace<double> reconstruct_once(const ExperimentConfig& config,
                                           const CauchyData<double>& data, double eta,
                                           double epsilon_cone = 0.0) {
  OptimizerConfig<double> opt = config.optimizer();
  opt.eta = eta;
  if (epsilon_cone > 0.0)
    opt.epsilon_cone = epsilon_cone;
  else if (epsilon_cone == 0.0 && config.epsilon_cone <= 0.0)
    opt.epsilon_cone.reset();
  return minimize(config.initial_shape(), config.domain(), data, opt, config.mesh_params(),
                  {config.true_shape});
}

}  // namespace

void write_manifest(const ExperimentConfig& config, const std::string& out_dir,
                    const std::string& subcommand) {
  auto os = open_out(out_dir, "manifest.txt");
  os << "tool = shapeinv " << kToolVersion << "\n";
  os << "subcommand = " << subcommand << "\n";
  os << "eigen = " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "."
     << EIGEN_MINOR_VERSION << "\n";
  os << "compiler = " << __VERSION__ << "\n";
  os << "config_hash = " << hex_hash(config.hash()) << "\n";
  os << "# resolved configuration\n";
  os << config.serialize();
}

RunSummary run_forward(const ExperimentConfig& config, const std::string& out_dir) {
  RunSummary summary;
  write_manifest(config, out_dir, "forward");
  const auto domain = config.domain();
  const auto params = config.mesh_params();
  const auto g_N = config.neumann_datum();

  const auto mesh =
      build_mesh(config.true_shape, domain, params.n_radial, params.n_angular, params.grading);
  const FemSystem<double> system(mesh);
  const auto u = system.solve(g_N);

  {
    auto os = open_out(out_dir, "mesh.txt");
    save_mesh(os, mesh);
  }
  {
    auto os = open_out(out_dir, "solution.txt");
    save_nodal_field(os, u);
  }
  {
    auto os = open_out(out_dir, "trace.csv");
    save_boundary_field(os, outer_trace(u));
  }
  {
    auto os = open_out(out_dir, "flux.csv");
    save_boundary_field(os, system.inner_flux(u));
  }

  auto os = open_out(out_dir, "report.csv");
  os << "n_radial,n_angular,bessel_rel_l2_error,observed_order\n";
  const bool circular = effective_max_mode(config.true_shape) == 0 &&
                        config.true_shape.center.norm() == 0.0 && config.g_N_mode == 0;
  if (circular) {
    const auto radial = solve_annulus_radial(config.true_shape.r0, domain.outer_radius, 1.0);
    auto rel_error = [&](Index nr, Index na) {
      const auto m = build_mesh(config.true_shape, domain, nr, na, params.grading);
      const FemSystem<double> sys(m);
      const auto uh = sys.solve(g_N.resampled(na));
      NodalField<double> err{&m, VectorX<double>(m.node_count())};
      NodalField<double> exact{&m, VectorX<double>(m.node_count())};
      for (Index k = 0; k < m.node_count(); ++k) {
        exact.values[k] = radial.value(m.node(k).norm());
        err.values[k] = uh.values[k] - exact.values[k];
      }
      return sys.l2_norm(err) / sys.l2_norm(exact);
    };
    const double e_coarse = rel_error(params.n_radial / 2, params.n_angular / 2);
    const double e_fine = rel_error(params.n_radial, params.n_angular);
    const double order = std::log2(e_coarse / e_fine);
    os << params.n_radial / 2 << "," << params.n_angular / 2 << "," << format_full(e_coarse)
       << ",\n";
    os << params.n_radial << "," << params.n_angular << "," << format_full(e_fine) << ","
       << format_full(order) << "\n";
    summary.notes.push_back("bessel_rel_l2_error = " + format_full(e_fine));
    summary.notes.push_back("observed_order = " + format_full(order));
  } else {
    os << params.n_radial << "," << params.n_angular << ",,\n";
    summary.notes.push_back("non-circular shape: no closed-form reference");
  }
  return summary;
}

RunSummary run_gradient_check(const ExperimentConfig& config, const std::string& out_dir) {
  RunSummary summary;
  write_manifest(config, out_dir, "gradient-check");
  const auto data = config.make_data();
  const auto check = verify_gradient_fd(config.true_shape, config.domain(), data, config.eta,
                                        config.fd_steps, config.mesh_params());
  {
    auto os = open_out(out_dir, "fd_errors.csv");
    os << "step,relative_error\n";
    for (Index s = 0; s < check.steps.size(); ++s)
      os << format_full(check.steps[s]) << "," << format_full(check.rel_errors[s]) << "\n";
  }
  {
    auto os = open_out(out_dir, "gradient.csv");
    save_gradient_report(os, check.report, config.true_shape.max_mode());
  }
  summary.notes.push_back("best_relative_error = " + format_full(check.best_error));
  summary.assertions_ok = check.best_error <= 1e-2;
  if (!summary.assertions_ok)
    summary.notes.push_back("FAIL: best relative error exceeds 1e-2");
  return summary;
}

RunSummary run_hessian_spectrum(const ExperimentConfig& config, const std::string& out_dir) {
  RunSummary summary;
  write_manifest(config, out_dir, "hessian-spectrum");
  const auto domain = config.domain();
  const auto params = config.mesh_params();
  const auto data = config.make_data();

  // Near-critical shape: descend from the configured initial shape (the true
  // shape by default, where matched data is already critical).
  const RadialShape<double> start =
      config.init_shape_given ? config.init_shape : config.true_shape;
  OptimizerConfig<double> opt = config.optimizer();
  opt.epsilon_cone.reset();
  const auto trace = minimize(start, domain, data, opt, params, {config.true_shape});
  const RadialShape<double> critical = trace.final_shape;
  {
    auto os = open_out(out_dir, "critical_shape.txt");
    save_shape(os, critical);
  }
  summary.notes.push_back("critical_gradient_norm = " +
                          format_full(trace.iterations.back().gradient_norm));

  auto quotient_name = [](double s) {
    return s == 0.0 ? std::string("L2") : (s == 0.5 ? std::string("H05") : std::string("H1"));
  };

  auto os = open_out(out_dir, "summary.csv");
  os << "eta,norm_exponent,rayleigh_lower_bound,symmetry_defect,lambda8_over_lambda1\n";
  double h1_bound_eta0 = 0.0, h1_bound_max_eta = 0.0, max_eta = 0.0;
  double l2_ratio_eta0 = -1.0;
  bool h1_monotone = true;
  std::vector<double> last_h1_bounds;
  for (const double s : config.norm_exponents) {
    double previous_bound = -std::numeric_limits<double>::infinity();
    for (const double eta : config.hessian_eta_list) {
      const auto spectrum =
          assemble_hessian(critical, domain, data, eta, config.k_basis, s, params);
      std::ostringstream name;
      name << "eigenvalues_eta" << format_full(eta) << "_" << quotient_name(s) << ".csv";
      {
        auto eig_os = open_out(out_dir, name.str());
        save_hessian_spectrum(eig_os, spectrum);
      }
      const double ratio = spectrum.eigenvalues.size() >= 8
                               ? spectrum.eigenvalues[7] / spectrum.eigenvalues[0]
                               : std::numeric_limits<double>::quiet_NaN();
      os << format_full(eta) << "," << format_full(s) << ","
         << format_full(spectrum.rayleigh_lower_bound) << ","
         << format_full(spectrum.symmetry_defect) << "," << format_full(ratio) << "\n";
      if (s == 0.0 && eta == 0.0) l2_ratio_eta0 = ratio;
      if (s == 1.0) {
        if (spectrum.rayleigh_lower_bound < previous_bound) h1_monotone = false;
        previous_bound = spectrum.rayleigh_lower_bound;
        if (eta == 0.0) h1_bound_eta0 = spectrum.rayleigh_lower_bound;
        if (eta >= max_eta) {
          max_eta = eta;
          h1_bound_max_eta = spectrum.rayleigh_lower_bound;
        }
      }
    }
  }

  if (l2_ratio_eta0 >= 0.0) {
    summary.notes.push_back("lambda8_over_lambda1(eta=0, L2) = " + format_full(l2_ratio_eta0));
    if (!(l2_ratio_eta0 < 1e-2)) {
      summary.assertions_ok = false;
      summary.notes.push_back("FAIL: eta=0 spectrum does not decay below 1e-2 by index 8");
    }
  }
  if (max_eta > 0.0) {
    summary.notes.push_back("h1_bound(eta=0) = " + format_full(h1_bound_eta0));
    summary.notes.push_back("h1_bound(eta=" + format_full(max_eta) + ") = " +
                            format_full(h1_bound_max_eta));
    if (!(h1_bound_max_eta > 0.0 && h1_bound_max_eta >= 10.0 * h1_bound_eta0)) {
      summary.assertions_ok = false;
      summary.notes.push_back("FAIL: H1 coercivity gain below 10x");
    }
    if (!h1_monotone) {
      summary.assertions_ok = false;
      summary.notes.push_back("FAIL: H1 bound not monotone in eta");
    }
  }
  return summary;
}

RunSummary run_reconstruct(const ExperimentConfig& config, const std::string& out_dir) {
  RunSummary summary;
  write_manifest(config, out_dir, "reconstruct");
  const auto data = config.make_data();
  {
    auto os = open_out(out_dir, "data.csv");
    save_cauchy_data(os, data);
  }

  const auto trace = reconstruct_once(config, data, config.eta, config.epsilon_cone);
  {
    auto os = open_out(out_dir, "trace.csv");
    save_trace(os, trace);
  }
  {
    auto os = open_out(out_dir, "final_shape.txt");
    save_shape(os, trace.final_shape);
  }
  const double d_truth = hausdorff_distance(trace.final_shape, config.true_shape);
  {
    auto os = open_out(out_dir, "summary.csv");
    os << "hausdorff_to_truth,final_misfit,iterations,stop_reason,evaluations\n";
    os << format_full(d_truth) << "," << format_full(trace.iterations.back().objective.misfit)
       << "," << trace.iterations.size() - 1 << "," << to_string(trace.stop_reason) << ","
       << trace.evaluation_count << "\n";
  }
  summary.notes.push_back("hausdorff_to_truth = " + format_full(d_truth));

  if (!config.epsilon_list.empty()) {
    // Cone-constrained reruns: for small epsilon the constraint must not move
    // the minimizer away from the unconstrained one.
    std::vector<OptimizationTrace<double>> runs(config.epsilon_list.size());
    run_indexed(config.jobs, int(config.epsilon_list.size()), [&](int i) {
      runs[i] = reconstruct_once(config, data, config.eta, config.epsilon_list[i]);
    });
    auto os = open_out(out_dir, "eps_sweep.csv");
    os << "epsilon,hausdorff_to_unconstrained,hausdorff_to_truth\n";
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const double d_unc = hausdorff_distance(runs[i].final_shape, trace.final_shape);
      os << format_full(config.epsilon_list[i]) << "," << format_full(d_unc) << ","
         << format_full(hausdorff_distance(runs[i].final_shape, config.true_shape)) << "\n";
      std::ostringstream name;
      name << "final_shape_eps" << format_full(config.epsilon_list[i]) << ".txt";
      auto shape_os = open_out(out_dir, name.str());
      save_shape(shape_os, runs[i].final_shape);
    }
    const std::size_t smallest = std::min_element(config.epsilon_list.begin(),
                                                  config.epsilon_list.end()) -
                                 config.epsilon_list.begin();
    const double d_small =
        hausdorff_distance(runs[smallest].final_shape, trace.final_shape);
    summary.notes.push_back("smallest_epsilon_gap = " + format_full(d_small));
    if (!(d_small < 2e-3)) {
      summary.assertions_ok = false;
      summary.notes.push_back("FAIL: small-epsilon run drifted from the unconstrained one");
    }
  }
  return summary;
}

RunSummary run_eta_sweep(const ExperimentConfig& config, const std::string& out_dir) {
  RunSummary summary;
  write_manifest(config, out_dir, "eta-sweep");
  const auto data = config.make_data();

  const int n_runs = config.eta_steps + 1;
  std::vector<double> etas(n_runs);
  for (int n = 0; n < n_runs; ++n) etas[n] = config.eta0 * std::pow(2.0, -n);

  std::vector<OptimizationTrace<double>> runs(n_runs);
  OptimizationTrace<double> reference;
  run_indexed(config.jobs, n_runs + 1, [&](int i) {
    if (i == n_runs)
      reference = reconstruct_once(config, data, 0.0);
    else
      runs[i] = reconstruct_once(config, data, etas[i]);
  });

  {
    auto os = open_out(out_dir, "reference_shape.txt");
    save_shape(os, reference.final_shape);
  }
  std::vector<double> gaps(n_runs);
  auto os = open_out(out_dir, "eta_sweep.csv");
  os << "n,eta,hausdorff_to_reference,hausdorff_to_truth,final_misfit\n";
  for (int n = 0; n < n_runs; ++n) {
    gaps[n] = hausdorff_distance(runs[n].final_shape, reference.final_shape);
    os << n << "," << format_full(etas[n]) << "," << format_full(gaps[n]) << ","
       << format_full(hausdorff_distance(runs[n].final_shape, config.true_shape)) << ","
       << format_full(runs[n].iterations.back().objective.misfit) << "\n";
  }

  const std::size_t tail = decreasing_tail_start(gaps);
  summary.notes.push_back("decreasing_tail_start = " + std::to_string(tail));
  if (n_runs >= 3 && !(tail + 2 <= std::size_t(n_runs) - 1)) {
    summary.assertions_ok = false;
    summary.notes.push_back("FAIL: gap sequence is not eventually decreasing");
  }
  return summary;
}

RunSummary run_stability_study(const ExperimentConfig& config, const std::string& out_dir) {
  RunSummary summary;
  write_manifest(config, out_dir, "stability-study");
  const double eta_reg = config.eta > 0.0 ? config.eta : 1e-3;

  struct Cell {
    double noise, eta, hausdorff, misfit, high_energy;
    std::uint64_t seed;
  };
  const int n_noise = int(config.noise_list.size());
  const int n_seeds = int(config.seeds.size());
  std::vector<Cell> cells(std::size_t(n_noise) * n_seeds * 2);

  run_indexed(config.jobs, int(cells.size()), [&](int idx) {
    const int which_eta = idx % 2;
    const int seed_idx = (idx / 2) % n_seeds;
    const int noise_idx = idx / (2 * n_seeds);
    const double noise = config.noise_list[noise_idx];
    const std::uint64_t seed = config.seeds[seed_idx];
    const double eta = which_eta ? eta_reg : 0.0;

    ExperimentConfig local = config;
    local.noise_level = noise;
    local.seed = seed;
    const auto data = local.make_data();
    const auto trace = reconstruct_once(local, data, eta);
    cells[idx] = {noise,
                  eta,
                  hausdorff_distance(trace.final_shape, config.true_shape),
                  trace.iterations.back().objective.misfit,
                  high_mode_energy(trace.final_shape, 6),
                  seed};
  });

  {
    auto os = open_out(out_dir, "stability.csv");
    os << "noise_level,seed,eta,hausdorff_to_truth,final_misfit,high_mode_energy\n";
    for (const auto& c : cells)
      os << format_full(c.noise) << "," << c.seed << "," << format_full(c.eta) << ","
         << format_full(c.hausdorff) << "," << format_full(c.misfit) << ","
         << format_full(c.high_energy) << "\n";
  }

  auto os = open_out(out_dir, "medians.csv");
  os << "noise_level,median_dH_eta0,median_dH_reg,energy_reduced_count,seeds\n";
  for (int ni = 0; ni < n_noise; ++ni) {
    std::vector<double> d0, d1;
    int reduced = 0;
    for (int si = 0; si < n_seeds; ++si) {
      const auto& plain = cells[std::size_t(ni) * n_seeds * 2 + si * 2];
      const auto& reg = cells[std::size_t(ni) * n_seeds * 2 + si * 2 + 1];
      d0.push_back(plain.hausdorff);
      d1.push_back(reg.hausdorff);
      if (reg.high_energy < plain.high_energy) ++reduced;
    }
    const double m0 = median(d0), m1 = median(d1);
    os << format_full(config.noise_list[ni]) << "," << format_full(m0) << "," << format_full(m1)
       << "," << reduced << "," << n_seeds << "\n";
    summary.notes.push_back("noise " + format_full(config.noise_list[ni]) + ": median dH " +
                            format_full(m0) + " -> " + format_full(m1) + ", energy reduced in " +
                            std::to_string(reduced) + "/" + std::to_string(n_seeds));
    if (!(m1 <= m0)) {
      summary.assertions_ok = false;
      summary.notes.push_back("FAIL: regularized median worse at this noise level");
    }
    if (!(2 * reduced > n_seeds)) {
      summary.assertions_ok = false;
      summary.notes.push_back("FAIL: high-mode energy not reduced for most seeds");
    }
  }
  return summary;
}

}  // namespace shapeinv::cli
