#pragma once

#include "shapeinv/fem.hpp"
#include "shapeinv/functionals.hpp"
#include "shapeinv/geometry.hpp"
#include "shapeinv/types.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <optional>
#include <vector>

namespace shapeinv {

/// First shape derivative of L_eta in the radial coefficient basis.
///
/// density holds G = -du/dnu dw/dnu + eta H on the obstacle boundary, with
/// both normal derivatives taken along the normal pointing out of the
/// obstacle. With that orientation the misfit term enters with a minus sign
/// (the product formula is orientation-invariant, the pairing with the
/// displacement is not); the sign here is the one that matches finite
/// differences of the objective.
template <typename Scalar>
struct GradientReport {
  BoundaryField<Scalar> density;
  VectorX<Scalar> coeff_gradient;  // ordered [r0, a_1..a_K, b_1..b_K]
  std::optional<Scalar> fd_relative_error;
};

/// Quadratic form of the shape Hessian surrogate expressed in the radial
/// Fourier basis, orthonormalized in a boundary H^s norm.
template <typename Scalar>
struct HessianSpectrum {
  Index basis_size = 0;
  MatrixX<Scalar> matrix;      // normalized, symmetrized entries
  VectorX<Scalar> eigenvalues;  // descending
  Scalar norm_exponent = Scalar(0);
  Scalar rayleigh_lower_bound = Scalar(0);  // min diagonal quotient
  Scalar symmetry_defect = Scalar(0);
  Scalar eta = Scalar(0);
};

/// Adjoint state: Neumann datum is the boundary residual of the state, zero
/// Dirichlet data on the obstacle.
template <typename Scalar>
NodalField<Scalar> solve_adjoint(const FemSystem<Scalar>& system, const CauchyData<Scalar>& data,
                                 const NodalField<Scalar>& u) {
  const VectorX<Scalar> residual =
      system.outer_trace_values(u) - system.sample_at_mesh_angles(data.g_D);
  return system.solve_nodal(residual, VectorX<Scalar>::Zero(system.mesh().n_angular));
}

/// Shape derivative of the state under a normal perturbation h of the
/// obstacle boundary: homogeneous Neumann data outside, u' = -du/dnu h on the
/// obstacle.
template <typename Scalar>
NodalField<Scalar> solve_u_prime(const FemSystem<Scalar>& system, const NodalField<Scalar>& u,
                                 const BoundaryField<Scalar>& h_normal) {
  const VectorX<Scalar> flux = system.inner_flux(u).values();
  const VectorX<Scalar> h = system.sample_at_mesh_angles(h_normal);
  const VectorX<Scalar> dirichlet = -flux.cwiseProduct(h);
  return system.solve_nodal(VectorX<Scalar>::Zero(system.mesh().n_angular), dirichlet);
}

/// Shape derivative of the adjoint: Neumann datum is the trace of u',
/// Dirichlet datum is -dw/dnu h on the obstacle.
template <typename Scalar>
NodalField<Scalar> solve_w_prime(const FemSystem<Scalar>& system, const NodalField<Scalar>& w,
                                 const NodalField<Scalar>& u_prime,
                                 const BoundaryField<Scalar>& h_normal) {
  const VectorX<Scalar> flux_w = system.inner_flux(w).values();
  const VectorX<Scalar> h = system.sample_at_mesh_angles(h_normal);
  return system.solve_nodal(system.outer_trace_values(u_prime), -flux_w.cwiseProduct(h));
}

namespace detail {

// Dense quadrature grid for the spectrally evaluated perimeter terms.
template <typename Scalar>
Index perimeter_grid(const RadialShape<Scalar>& shape) {
  return std::max<Index>(kDefaultThetaSamples, 8 * shape.max_mode());
}

// d/dc integral sqrt(r^2 + r'^2) d.theta as the curvature pairing
// integral H (e_r . nu) phi_c ds = integral kappa r phi_c d.theta, evaluated
// by the periodic trapezoid rule (spectrally accurate, exact on circles).
template <typename Scalar>
VectorX<Scalar> perimeter_gradient(const RadialShape<Scalar>& shape) {
  const Index n = perimeter_grid(shape);
  const Index k_max = shape.max_mode();
  VectorX<Scalar> grad = VectorX<Scalar>::Zero(1 + 2 * k_max);
  const Scalar dtheta = two_pi<Scalar>() / Scalar(n);
  for (Index j = 0; j < n; ++j) {
    const Scalar theta = dtheta * Scalar(j);
    const Scalar weight = curvature(shape, theta) * radius_at(shape, theta) * dtheta;
    grad[0] += weight;
    for (Index k = 1; k <= k_max; ++k) {
      grad[k] += weight * std::cos(Scalar(k) * theta);
      grad[k_max + k] += weight * std::sin(Scalar(k) * theta);
    }
  }
  return grad;
}

// Second derivative of the perimeter along normal fields: in 2d the curvature
// terms cancel and only integral |d_tau h|^2 ds survives. Returns the dense
// tangential-derivative samples of h_n = h_radial * (e_r . nu) scaled so that
// pairing two of them with d.theta weights yields the bilinear form.
template <typename Scalar>
VectorX<Scalar> tangential_derivative_samples(const RadialShape<Scalar>& shape,
                                              const BoundaryField<Scalar>& h_radial, Index n) {
  VectorX<Scalar> hn(n);
  for (Index j = 0; j < n; ++j) {
    const Scalar theta = two_pi<Scalar>() * Scalar(j) / Scalar(n);
    hn[j] = h_radial(theta) * radial_normal_factor(shape, theta);
  }
  const BoundaryField<Scalar> dense(std::move(hn));
  VectorX<Scalar> out(n);
  for (Index j = 0; j < n; ++j) {
    const Scalar theta = two_pi<Scalar>() * Scalar(j) / Scalar(n);
    const Scalar r = radius_at(shape, theta);
    const Scalar rp = radius_derivative(shape, theta);
    // (dh_n/d.theta)^2 / |x'| integrated d.theta; split the metric evenly.
    out[j] = dense.derivative_at(theta) / std::sqrt(std::sqrt(r * r + rp * rp));
  }
  return out;
}

template <typename Scalar>
Scalar perimeter_hessian_pairing(const VectorX<Scalar>& dt_i, const VectorX<Scalar>& dt_j) {
  return dt_i.dot(dt_j) * two_pi<Scalar>() / Scalar(dt_i.size());
}

// Radial basis directions phi_0 = 1, phi_k = cos k.theta, phi_{K+k} = sin k.theta
// as boundary fields on a grid of size n.
template <typename Scalar>
BoundaryField<Scalar> basis_field(Index c, Index k_max, Index n) {
  if (c == 0) return BoundaryField<Scalar>::constant(Scalar(1), n);
  if (c <= k_max) return BoundaryField<Scalar>::harmonic(c, false, n);
  return BoundaryField<Scalar>::harmonic(c - k_max, true, n);
}

}  // namespace detail

template <typename Scalar>
struct GradientEvaluation {
  ObjectiveValue<Scalar> objective;
  GradientReport<Scalar> report;
};

/// Objective and adjoint shape gradient in one pass (one mesh assembly, one
/// state and one adjoint solve).
template <typename Scalar>
GradientEvaluation<Scalar> objective_and_gradient(const RadialShape<Scalar>& shape,
                                                  const HoldAll<Scalar>& domain,
                                                  const CauchyData<Scalar>& data, Scalar eta,
                                                  const MeshParams<Scalar>& params = {}) {
  const AnnularMesh<Scalar> mesh =
      build_mesh(shape, domain, params.n_radial, params.n_angular, params.grading, params.phase);
  const FemSystem<Scalar> system(mesh);
  const NodalField<Scalar> u = system.solve(data.g_N);
  const NodalField<Scalar> w = solve_adjoint(system, data, u);
  const VectorX<Scalar> flux_u = system.inner_flux(u).values();
  const VectorX<Scalar> flux_w = system.inner_flux(w).values();

  const Index na = mesh.n_angular;
  const Index k_max = shape.max_mode();

  // Density G = -du/dnu dw/dnu + eta H on the mesh's inner grid.
  VectorX<Scalar> density(na);
  VectorX<Scalar> rho(na);
  for (Index j = 0; j < na; ++j) {
    const Scalar theta = mesh.theta_of(j);
    density[j] = -flux_u[j] * flux_w[j] + eta * curvature(shape, theta);
    rho[j] = radial_normal_factor(shape, theta);
  }

  // Misfit part of the coefficient gradient: -< flux_u rho phi_c, flux_w >
  // in the inner boundary mass, so the pairing matches the discrete adjoint
  // chain exactly. The common nodal weight is precomputed once.
  const VectorX<Scalar> weight =
      (-flux_u.cwiseProduct(rho)).cwiseProduct(system.inner_mass_apply(flux_w));

  VectorX<Scalar> grad = VectorX<Scalar>::Zero(1 + 2 * k_max);
  for (Index j = 0; j < na; ++j) {
    const Scalar theta = mesh.theta_of(j);
    grad[0] += weight[j];
    for (Index k = 1; k <= k_max; ++k) {
      grad[k] += weight[j] * std::cos(Scalar(k) * theta);
      grad[k_max + k] += weight[j] * std::sin(Scalar(k) * theta);
    }
  }
  if (eta != Scalar(0)) grad += eta * detail::perimeter_gradient(shape);

  GradientEvaluation<Scalar> out;
  out.objective.misfit = boundary_misfit(system, u, data.g_D);
  out.objective.perimeter = relative_perimeter(shape, domain);
  out.objective.eta = eta;
  out.objective.total = out.objective.misfit + eta * out.objective.perimeter;
  out.report.density = BoundaryField<Scalar>(std::move(density), mesh.phase);
  out.report.coeff_gradient = std::move(grad);
  return out;
}

template <typename Scalar>
GradientReport<Scalar> shape_gradient(const RadialShape<Scalar>& shape,
                                      const HoldAll<Scalar>& domain,
                                      const CauchyData<Scalar>& data, Scalar eta,
                                      const MeshParams<Scalar>& params = {}) {
  return objective_and_gradient(shape, domain, data, eta, params).report;
}

template <typename Scalar>
struct FdCheck {
  VectorX<Scalar> steps;
  VectorX<Scalar> rel_errors;  // gradient-vector relative error per step
  Scalar best_error = std::numeric_limits<Scalar>::max();
  GradientReport<Scalar> report;
};

/// Central finite differences of the objective along every coefficient
/// direction, compared against the adjoint gradient. Errors first shrink with
/// the step and then saturate at the consistency floor of the discretization.
template <typename Scalar>
FdCheck<Scalar> verify_gradient_fd(const RadialShape<Scalar>& shape, const HoldAll<Scalar>& domain,
                                   const CauchyData<Scalar>& data, Scalar eta,
                                   const std::vector<Scalar>& steps,
                                   const MeshParams<Scalar>& params = {}) {
  detail::require(!steps.empty(), "verify_gradient_fd: need at least one step");
  for (std::size_t i = 0; i + 1 < steps.size(); ++i)
    detail::require(steps[i] > steps[i + 1] && steps[i + 1] > Scalar(0),
                    "verify_gradient_fd: steps must be positive and decreasing");

  FdCheck<Scalar> check;
  check.report = shape_gradient(shape, domain, data, eta, params);
  const VectorX<Scalar>& g = check.report.coeff_gradient;
  const VectorX<Scalar> c0 = to_coefficients(shape);
  const Scalar scale = std::max(g.norm(), std::numeric_limits<Scalar>::min());

  check.steps.resize(Index(steps.size()));
  check.rel_errors.resize(Index(steps.size()));
  for (std::size_t s = 0; s < steps.size(); ++s) {
    const Scalar step = steps[s];
    VectorX<Scalar> fd(g.size());
    for (Index c = 0; c < g.size(); ++c) {
      VectorX<Scalar> cp = c0, cm = c0;
      cp[c] += step;
      cm[c] -= step;
      const Scalar fp = evaluate(shape_with_coefficients(shape, cp), domain, data, eta, params).total;
      const Scalar fm = evaluate(shape_with_coefficients(shape, cm), domain, data, eta, params).total;
      fd[c] = (fp - fm) / (Scalar(2) * step);
    }
    check.steps[Index(s)] = step;
    check.rel_errors[Index(s)] = (fd - g).norm() / scale;
    check.best_error = std::min(check.best_error, check.rel_errors[Index(s)]);
  }
  check.report.fd_relative_error = check.best_error;
  return check;
}

/// Quadratic form of the shape Hessian surrogate along a radial perturbation
/// field: the misfit part pairs du/dnu with the flux of the perturbed adjoint
/// w', the perimeter part is eta integral |d_tau h_n|^2 ds. Away from critical
/// shapes this is the Gauss-Newton-plus-curvature surrogate of the full second
/// derivative.
template <typename Scalar>
Scalar hessian_apply(const RadialShape<Scalar>& shape, const HoldAll<Scalar>& domain,
                     const CauchyData<Scalar>& data, Scalar eta,
                     const BoundaryField<Scalar>& h_radial, const MeshParams<Scalar>& params = {}) {
  const AnnularMesh<Scalar> mesh =
      build_mesh(shape, domain, params.n_radial, params.n_angular, params.grading, params.phase);
  const FemSystem<Scalar> system(mesh);
  const NodalField<Scalar> u = system.solve(data.g_N);
  const NodalField<Scalar> w = solve_adjoint(system, data, u);
  const VectorX<Scalar> flux_u = system.inner_flux(u).values();
  const VectorX<Scalar> flux_w = system.inner_flux(w).values();

  const Index na = mesh.n_angular;
  VectorX<Scalar> h(na);
  for (Index j = 0; j < na; ++j) {
    const Scalar theta = mesh.theta_of(j);
    h[j] = h_radial(theta) * radial_normal_factor(shape, theta);
  }

  const NodalField<Scalar> u_prime =
      system.solve_nodal(VectorX<Scalar>::Zero(na), (-flux_u.cwiseProduct(h)).eval());
  const NodalField<Scalar> w_prime = system.solve_nodal(system.outer_trace_values(u_prime),
                                                        (-flux_w.cwiseProduct(h)).eval());

  const Scalar misfit_part = flux_u.cwiseProduct(h).dot(system.inner_flux_moments(w_prime));

  const VectorX<Scalar> dt = detail::tangential_derivative_samples(
      shape, h_radial, detail::perimeter_grid(shape));
  return misfit_part + eta * detail::perimeter_hessian_pairing(dt, dt);
}

/// Full Hessian surrogate in the radial Fourier basis {1, cos k, sin k},
/// k <= k_basis: 2k+1 state-derivative solves and 2k+1 adjoint-derivative
/// solves, paired bilinearly. Entries are symmetrized after the raw asymmetry
/// is checked; eigenvalues are taken after normalizing each basis direction by
/// its boundary H^s norm.
template <typename Scalar>
HessianSpectrum<Scalar> assemble_hessian(const RadialShape<Scalar>& shape,
                                         const HoldAll<Scalar>& domain,
                                         const CauchyData<Scalar>& data, Scalar eta,
                                         Index k_basis, Scalar norm_exponent,
                                         const MeshParams<Scalar>& params = {},
                                         Scalar symmetry_tol = Scalar(1e-8)) {
  detail::require(k_basis >= 0 && k_basis <= shape.max_mode(),
                  "assemble_hessian: k_basis must not exceed the shape's max mode");
  const AnnularMesh<Scalar> mesh =
      build_mesh(shape, domain, params.n_radial, params.n_angular, params.grading, params.phase);
  FemSystem<Scalar> system(mesh, {Scalar(1e-12)});
  const NodalField<Scalar> u = system.solve(data.g_N);
  const NodalField<Scalar> w = solve_adjoint(system, data, u);
  const VectorX<Scalar> flux_u = system.inner_flux(u).values();
  const VectorX<Scalar> flux_w = system.inner_flux(w).values();

  const Index na = mesh.n_angular;
  const Index dim = 1 + 2 * k_basis;
  const Index n_dense = detail::perimeter_grid(shape);

  VectorX<Scalar> rho(na);
  for (Index j = 0; j < na; ++j) rho[j] = radial_normal_factor(shape, mesh.theta_of(j));

  MatrixX<Scalar> misfit_pairing(dim, dim);
  MatrixX<Scalar> perim_pairing(dim, dim);
  std::vector<VectorX<Scalar>> weighted(dim);  // flux_u .* h_c at the inner nodes
  std::vector<VectorX<Scalar>> moments(dim);   // flux moments of w'_c
  std::vector<VectorX<Scalar>> tangential(dim);

  for (Index c = 0; c < dim; ++c) {
    const BoundaryField<Scalar> phi = detail::basis_field<Scalar>(c, k_basis, na);
    VectorX<Scalar> h(na);
    for (Index j = 0; j < na; ++j) h[j] = phi(mesh.theta_of(j)) * rho[j];
    const NodalField<Scalar> u_prime =
        system.solve_nodal(VectorX<Scalar>::Zero(na), (-flux_u.cwiseProduct(h)).eval());
    const NodalField<Scalar> w_prime = system.solve_nodal(system.outer_trace_values(u_prime),
                                                          (-flux_w.cwiseProduct(h)).eval());
    weighted[c] = flux_u.cwiseProduct(h);
    moments[c] = system.inner_flux_moments(w_prime);
    tangential[c] = detail::tangential_derivative_samples(
        shape, detail::basis_field<Scalar>(c, k_basis, n_dense), n_dense);
  }

  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) {
      misfit_pairing(i, j) = weighted[i].dot(moments[j]);
      perim_pairing(i, j) = detail::perimeter_hessian_pairing(tangential[i], tangential[j]);
    }

  MatrixX<Scalar> raw = misfit_pairing + eta * perim_pairing;
  const Scalar scale = raw.cwiseAbs().maxCoeff();
  const Scalar defect =
      scale > Scalar(0) ? (raw - raw.transpose()).cwiseAbs().maxCoeff() / scale : Scalar(0);
  if (defect > symmetry_tol)
    throw std::runtime_error("assemble_hessian: symmetry defect " + std::to_string(double(defect)) +
                             " exceeds tolerance (inconsistent derivative implementation)");
  MatrixX<Scalar> sym = Scalar(0.5) * (raw + raw.transpose());

  VectorX<Scalar> norms(dim);
  for (Index c = 0; c < dim; ++c)
    norms[c] =
        boundary_norm(detail::basis_field<Scalar>(c, k_basis, n_dense), shape, norm_exponent);
  MatrixX<Scalar> normalized = sym;
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) normalized(i, j) /= norms[i] * norms[j];

  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(normalized);
  detail::require(eig.info() == Eigen::Success, "assemble_hessian: eigensolver failed");

  HessianSpectrum<Scalar> spectrum;
  spectrum.basis_size = dim;
  spectrum.matrix = std::move(normalized);
  spectrum.eigenvalues = eig.eigenvalues().reverse();
  spectrum.norm_exponent = norm_exponent;
  spectrum.rayleigh_lower_bound = spectrum.matrix.diagonal().minCoeff();
  spectrum.symmetry_defect = defect;
  spectrum.eta = eta;
  return spectrum;
}

}  // namespace shapeinv
