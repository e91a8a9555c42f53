#pragma once

#include "shapeinv/fem.hpp"
#include "shapeinv/functionals.hpp"
#include "shapeinv/geometry.hpp"
#include "shapeinv/mesh.hpp"
#include "shapeinv/optimize.hpp"
#include "shapeinv/shape_calculus.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace shapeinv {

/// Shortest decimal round-trip formatting (17 significant digits).
inline std::string format_full(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// --- shapes: human-readable key-value text, exact decimal round-trip ---

template <typename Scalar>
void save_shape(std::ostream& os, const RadialShape<Scalar>& shape) {
  os << "r0 = " << format_full(double(shape.r0)) << "\n";
  for (Index k = 1; k <= shape.max_mode(); ++k)
    os << "a" << k << " = " << format_full(double(shape.cos_coeffs[k - 1])) << "\n";
  for (Index k = 1; k <= shape.max_mode(); ++k)
    os << "b" << k << " = " << format_full(double(shape.sin_coeffs[k - 1])) << "\n";
}

template <typename Scalar>
RadialShape<Scalar> load_shape(std::istream& is, Index max_mode = kDefaultMaxMode) {
  RadialShape<Scalar> shape = make_circle(Scalar(0), max_mode);
  std::string line;
  Index lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::istringstream key_in(line.substr(0, eq));
    std::string key;
    key_in >> key;
    if (key.empty()) continue;
    const Scalar value = Scalar(std::stod(line.substr(eq + 1)));
    if (key == "r0") {
      shape.r0 = value;
    } else if ((key[0] == 'a' || key[0] == 'b') && key.size() > 1) {
      const Index k = Index(std::stol(key.substr(1)));
      detail::require(k >= 1 && k <= max_mode,
                      "load_shape: mode out of range at line " + std::to_string(lineno));
      (key[0] == 'a' ? shape.cos_coeffs : shape.sin_coeffs)[k - 1] = value;
    } else {
      throw std::invalid_argument("load_shape: unknown key '" + key + "' at line " +
                                  std::to_string(lineno));
    }
  }
  return shape;
}

template <typename Scalar>
void save_shape_file(const std::string& path, const RadialShape<Scalar>& shape) {
  std::ofstream os(path);
  detail::require(bool(os), "save_shape_file: cannot open " + path);
  save_shape(os, shape);
}

template <typename Scalar>
RadialShape<Scalar> load_shape_file(const std::string& path, Index max_mode = kDefaultMaxMode) {
  std::ifstream is(path);
  detail::require(bool(is), "load_shape_file: cannot open " + path);
  return load_shape<Scalar>(is, max_mode);
}

// --- meshes and fields: plain-text tables ---

/// Node table (id x y), triangle table (id n0 n1 n2, counter-clockwise),
/// then the ordered inner and outer boundary node lists.
template <typename Scalar>
void save_mesh(std::ostream& os, const AnnularMesh<Scalar>& mesh) {
  os << "# nodes " << mesh.node_count() << "\n";
  for (Index k = 0; k < mesh.node_count(); ++k)
    os << k << " " << format_full(double(mesh.nodes(k, 0))) << " "
       << format_full(double(mesh.nodes(k, 1))) << "\n";
  os << "# triangles " << mesh.triangle_count() << "\n";
  for (Index t = 0; t < mesh.triangle_count(); ++t)
    os << t << " " << mesh.triangles(t, 0) << " " << mesh.triangles(t, 1) << " "
       << mesh.triangles(t, 2) << "\n";
  os << "# inner_boundary " << mesh.inner_boundary.size() << "\n";
  for (const Index k : mesh.inner_boundary) os << k << "\n";
  os << "# outer_boundary " << mesh.outer_boundary.size() << "\n";
  for (const Index k : mesh.outer_boundary) os << k << "\n";
}

/// Node-value table aligned with the mesh export.
template <typename Scalar>
void save_nodal_field(std::ostream& os, const NodalField<Scalar>& field) {
  os << "node,value\n";
  for (Index k = 0; k < field.values.size(); ++k)
    os << k << "," << format_full(double(field.values[k])) << "\n";
}

template <typename Scalar>
void save_boundary_field(std::ostream& os, const BoundaryField<Scalar>& field) {
  os << "theta,value\n";
  for (Index j = 0; j < field.size(); ++j)
    os << format_full(double(field.theta_at(j))) << "," << format_full(double(field.values()[j]))
       << "\n";
}

template <typename Scalar>
void save_cauchy_data(std::ostream& os, const CauchyData<Scalar>& data) {
  os << "# noise_level = " << format_full(double(data.noise_level)) << "\n";
  os << "# seed = " << data.seed << "\n";
  os << "# fine_factor = " << data.fine_factor << "\n";
  os << "theta,g_N,g_D\n";
  for (Index j = 0; j < data.g_D.size(); ++j) {
    const double theta = double(data.g_D.theta_at(j));
    os << format_full(theta) << "," << format_full(double(data.g_N(theta))) << ","
       << format_full(double(data.g_D.values()[j])) << "\n";
  }
}

// --- derivative reports ---

template <typename Scalar>
void save_gradient_report(std::ostream& os, const GradientReport<Scalar>& report,
                          Index max_mode) {
  os << "coefficient,gradient\n";
  for (Index c = 0; c < report.coeff_gradient.size(); ++c)
    os << coefficient_label(c, max_mode) << "," << format_full(double(report.coeff_gradient[c]))
       << "\n";
  if (report.fd_relative_error)
    os << "# fd_relative_error," << format_full(double(*report.fd_relative_error)) << "\n";
}

template <typename Scalar>
void save_hessian_spectrum(std::ostream& os, const HessianSpectrum<Scalar>& spectrum) {
  os << "# eta = " << format_full(double(spectrum.eta)) << "\n";
  os << "# norm_exponent = " << format_full(double(spectrum.norm_exponent)) << "\n";
  os << "# symmetry_defect = " << format_full(double(spectrum.symmetry_defect)) << "\n";
  os << "# rayleigh_lower_bound = " << format_full(double(spectrum.rayleigh_lower_bound)) << "\n";
  os << "# matrix " << spectrum.basis_size << "\n";
  for (Index i = 0; i < spectrum.basis_size; ++i) {
    for (Index j = 0; j < spectrum.basis_size; ++j)
      os << (j ? " " : "") << format_full(double(spectrum.matrix(i, j)));
    os << "\n";
  }
  os << "index,eigenvalue\n";
  for (Index i = 0; i < spectrum.eigenvalues.size(); ++i)
    os << i + 1 << "," << format_full(double(spectrum.eigenvalues[i])) << "\n";
}

// --- optimizer traces: CSV, one row per iterate ---

template <typename Scalar>
void save_trace(std::ostream& os, const OptimizationTrace<Scalar>& trace) {
  os << "iteration,total,misfit,perimeter,step,gradient_norm,hausdorff,"
        "flag_min_radius,flag_inside_K,flag_cone\n";
  for (const auto& rec : trace.iterations) {
    os << rec.iteration << "," << format_full(double(rec.objective.total)) << ","
       << format_full(double(rec.objective.misfit)) << ","
       << format_full(double(rec.objective.perimeter)) << "," << format_full(double(rec.step))
       << "," << format_full(double(rec.gradient_norm)) << ",";
    if (rec.hausdorff_to_reference) os << format_full(double(*rec.hausdorff_to_reference));
    os << "," << int(rec.flags.above_min_radius) << "," << int(rec.flags.inside_safety_disk)
       << "," << int(rec.flags.cone_ok) << "\n";
  }
  os << "# stop_reason = " << to_string(trace.stop_reason) << "\n";
  os << "# evaluation_count = " << trace.evaluation_count << "\n";
}

}  // namespace shapeinv
