#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "shapeinv/bessel.hpp"
#include "shapeinv/io.hpp"
#include "shapeinv/shape_calculus.hpp"

#include <cmath>
#include <sstream>

using namespace shapeinv;

namespace {

const double kPi = EIGEN_PI;
const HoldAll<double> kDomain{1.0, 0.8, 0.1};
const MeshParams<double> kParams{16, 64};

CauchyData<double> inverse_crime_data(const RadialShape<double>& shape,
                                      const MeshParams<double>& params = kParams,
                                      Index n_data = kDefaultThetaSamples) {
  CauchyData<double> data;
  data.g_N = BoundaryField<double>::constant(1.0, n_data);
  data.g_D = forward_trace(shape, kDomain, data.g_N, params, n_data);
  return data;
}

CauchyData<double> zero_data(Index n_data = kDefaultThetaSamples) {
  CauchyData<double> data;
  data.g_N = BoundaryField<double>::constant(0.0, n_data);
  data.g_D = BoundaryField<double>::constant(0.0, n_data);
  return data;
}

double second_difference(const RadialShape<double>& shape, const CauchyData<double>& data,
                         double eta, const VectorX<double>& direction, double t,
                         const MeshParams<double>& params = kParams) {
  const VectorX<double> c0 = to_coefficients(shape);
  const double fp =
      evaluate(shape_with_coefficients(shape, (c0 + t * direction).eval()), kDomain, data, eta,
               params)
          .total;
  const double f0 = evaluate(shape, kDomain, data, eta, params).total;
  const double fm =
      evaluate(shape_with_coefficients(shape, (c0 - t * direction).eval()), kDomain, data, eta,
               params)
          .total;
  return (fp - 2.0 * f0 + fm) / (t * t);
}

}  // namespace

TEST_CASE("adjoint solve: zero residual gives zero adjoint, linear in the residual") {
  auto shape = make_circle(0.5);
  const auto data = inverse_crime_data(shape);
  const auto mesh = build_mesh(shape, kDomain, kParams.n_radial, kParams.n_angular);
  const FemSystem<double> system(mesh);
  const auto u = system.solve(data.g_N);

  // data equal to the own trace: residual (and so the adjoint) nearly zero
  CauchyData<double> matched = data;
  matched.g_D = outer_trace(u);
  const auto w0 = solve_adjoint(system, matched, u);
  CHECK(w0.values.cwiseAbs().maxCoeff() < 1e-10);

  // doubling the residual doubles the adjoint
  CauchyData<double> half = data;
  half.g_D = BoundaryField<double>(0.5 * data.g_D.values(), data.g_D.phase());
  CauchyData<double> zero = data;
  zero.g_D = BoundaryField<double>(0.0 * data.g_D.values(), data.g_D.phase());
  const auto w_half = solve_adjoint(system, half, u);
  const auto w_full = solve_adjoint(system, zero, u);
  const VectorX<double> doubled = 2.0 * (w_full.values - w_half.values);
  CHECK((w_full.values - 0.5 * doubled - 0.5 * w_full.values).norm() <=
        1e-12 * w_full.values.norm());

  // concentric case with g_D = 0: adjoint is radial with Neumann value u(1)
  const auto w = solve_adjoint(system, zero, u);
  const double u1 = outer_trace(u).values()[0];
  const auto oracle_w = solve_annulus_radial(0.5, 1.0, u1);
  for (Index j = 0; j < 8; ++j) {
    const Index node = mesh.node_index(8, j * 8);
    const double rho = mesh.node(node).norm();
    CHECK(w.values[node] == doctest::Approx(oracle_w.value(rho)).epsilon(1e-2));
  }
}

TEST_CASE("gradient vanishes on symmetric configurations for oscillatory modes") {
  const auto shape = make_circle(0.5);
  CauchyData<double> data;
  data.g_N = BoundaryField<double>::constant(1.0, 256);
  data.g_D = BoundaryField<double>::constant(0.0, 256);
  const auto report = shape_gradient(shape, kDomain, data, 1e-3, MeshParams<double>{32, 128});
  REQUIRE(report.coeff_gradient.size() == 1 + 2 * shape.max_mode());
  for (Index c = 1; c < report.coeff_gradient.size(); ++c)
    CHECK(std::abs(report.coeff_gradient[c]) < 1e-10);
  // the radial component carries the signal
  CHECK(std::abs(report.coeff_gradient[0]) > 1e-3);
}

TEST_CASE("perimeter gradient: dP/dr0 = 2 pi on circles, exact in eta-only mode") {
  const auto data = zero_data();
  for (double rho : {0.3, 0.5, 0.7}) {
    const auto report = shape_gradient(make_circle(rho), kDomain, data, 1.0, kParams);
    CHECK(report.coeff_gradient[0] == doctest::Approx(2.0 * kPi).epsilon(1e-10));
    for (Index c = 1; c < report.coeff_gradient.size(); ++c)
      CHECK(std::abs(report.coeff_gradient[c]) < 1e-10);
  }

  // zero data and eta = 0: gradient and FD both vanish
  const auto null_report = shape_gradient(make_circle(0.5), kDomain, data, 0.0, kParams);
  CHECK(null_report.coeff_gradient.cwiseAbs().maxCoeff() == 0.0);

  // perimeter-only FD: analytic in the coefficients, tight match
  auto wavy = oracle::random_shape(19, 0.5, 0.05);
  const auto check = verify_gradient_fd(wavy, kDomain, data, 1.0, {1e-4, 1e-5}, kParams);
  CHECK(check.best_error < 1e-6);
}

TEST_CASE("adjoint gradient matches central finite differences") {
  auto shape = make_circle(0.5);
  shape.cos_coeffs[1] = 0.1;  // a_2
  const auto data = inverse_crime_data(make_circle(0.45));
  const auto check =
      verify_gradient_fd(shape, kDomain, data, 1e-3, {1e-3, 1e-4, 1e-5}, kParams);
  CHECK(check.best_error < 1e-2);
  CHECK(check.report.fd_relative_error.has_value());
  // errors decrease and then saturate at the consistency floor
  CHECK(check.rel_errors[check.rel_errors.size() - 1] <= 1.5 * check.rel_errors[0]);

  // the floor shrinks under mesh refinement
  const auto fine = verify_gradient_fd(shape, kDomain, data, 1e-3, {1e-4}, kParams.refined(2));
  CHECK(fine.best_error < check.best_error);
}

TEST_CASE("adjoint consistency: density pairing equals the direct u' formula") {
  auto shape = oracle::random_shape(23, 0.5, 0.04);
  const auto data = inverse_crime_data(make_circle(0.45));
  const auto mesh = build_mesh(shape, kDomain, kParams.n_radial, kParams.n_angular);
  const FemSystem<double> system(mesh);
  const auto u = system.solve(data.g_N);
  const auto w = solve_adjoint(system, data, u);
  const VectorX<double> flux_u = system.inner_flux(u).values();
  const VectorX<double> flux_w = system.inner_flux(w).values();
  const VectorX<double> residual =
      system.outer_trace_values(u) - system.sample_at_mesh_angles(data.g_D);

  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 4; ++trial) {
    VectorX<double> h(mesh.n_angular);
    for (Index j = 0; j < mesh.n_angular; ++j) {
      const double theta = mesh.theta_of(j);
      const double a = 2.0 * double(rng() >> 11) * 0x1.0p-53 - 1.0;
      const double b = 2.0 * double(rng() >> 11) * 0x1.0p-53 - 1.0;
      h[j] = a * std::cos(theta) + b * std::sin(2.0 * theta);
    }
    const BoundaryField<double> h_field(h, mesh.phase);
    // adjoint route: - < flux_u h, flux_w > on the obstacle boundary
    const double via_adjoint =
        -system.inner_product_inner(flux_u.cwiseProduct(h), flux_w);
    // direct route: < trace u'(h), residual > on the outer boundary
    const auto u_prime = solve_u_prime(system, u, h_field);
    const double via_direct =
        system.inner_product_outer(system.outer_trace_values(u_prime), residual);
    CHECK(via_adjoint == doctest::Approx(via_direct).epsilon(1e-6));
  }
}

TEST_CASE("state derivative solves: trivial data and FD transport consistency") {
  const auto shape = make_circle(0.5);
  const auto data = inverse_crime_data(shape);
  const auto mesh = build_mesh(shape, kDomain, kParams.n_radial, kParams.n_angular);
  const FemSystem<double> system(mesh);
  const auto u = system.solve(data.g_N);

  const auto zero_h = BoundaryField<double>::constant(0.0, 64);
  CHECK(solve_u_prime(system, u, zero_h).values.cwiseAbs().maxCoeff() == 0.0);

  // concentric case, h = 1: u'(R0) = -du/drho(R0), radial Bessel profile
  const auto one_h = BoundaryField<double>::constant(1.0, 64);
  const auto u_prime = solve_u_prime(system, u, one_h);
  const auto state = solve_annulus_radial(0.5, 1.0, 1.0);
  const auto oracle_up = [&] {
    // solves the same operator with Dirichlet -u'(R0) at the obstacle and
    // zero Neumann outside: A I0 + B K0 with those boundary conditions
    const double i0 = bessel_i0(0.5), k0 = bessel_k0(0.5);
    const double i1 = bessel_i1(1.0), k1 = bessel_k1(1.0);
    const double dirichlet = -state.radial_derivative(0.5);
    // [i0 k0; i1 -k1] [A B]' = [dirichlet, 0]
    const double det = -i0 * k1 - k0 * i1;
    AnnulusRadialSolution<double> s;
    s.coeff_i0 = dirichlet * (-k1) / det;
    s.coeff_k0 = -dirichlet * i1 / det;
    return s;
  }();
  for (Index j = 0; j < 8; ++j) {
    const Index node = mesh.node_index(4, j * 8);
    const double rho = mesh.node(node).norm();
    CHECK(u_prime.values[node] == doctest::Approx(oracle_up.value(rho)).epsilon(1e-2));
  }

  // FD consistency at fixed physical probe points: the remainder
  // u_{t h} - u - t u' vanishes faster than t, observed order >= 1.5
  std::vector<Vector2<double>> probes;
  for (int i = 3; i <= 13; i += 2)
    for (int j = 0; j < 16; ++j) {
      const double rho = 0.5 + (i + 0.41) / 16.0 * 0.5;
      const double th = 2.0 * kPi * (j + 0.37) / 16.0;
      probes.push_back({rho * std::cos(th), rho * std::sin(th)});
    }
  auto remainder = [&](double t) {
    auto moved = shape;
    moved.r0 += t;  // radial perturbation with h = 1 (e_r . nu = 1 here)
    const auto mesh_t = build_mesh(moved, kDomain, kParams.n_radial, kParams.n_angular);
    const FemSystem<double> sys_t(mesh_t);
    const auto u_t = sys_t.solve(data.g_N);
    double acc = 0.0;
    for (const auto& x : probes) {
      const double diff = interpolate(u_t, x) - interpolate(u, x) - t * interpolate(u_prime, x);
      acc += diff * diff;
    }
    return std::sqrt(acc / double(probes.size()));
  };
  const double g1 = remainder(1e-1);
  const double g2 = remainder(1e-2);
  CHECK(std::log10(g1 / g2) >= 1.5);

  // w' bookkeeping: zero h and zero u' gives zero w'
  const auto w = solve_adjoint(system, data, u);
  const auto wp0 = solve_w_prime(system, w, solve_u_prime(system, u, zero_h), zero_h);
  CHECK(wp0.values.cwiseAbs().maxCoeff() < 1e-12);

  // with w = 0 (matched data) the w' solve carries only the outer Neumann term
  CauchyData<double> matched = data;
  matched.g_D = outer_trace(u);
  const auto w_zero = solve_adjoint(system, matched, u);
  const auto up1 = solve_u_prime(system, u, one_h);
  const auto wp = solve_w_prime(system, w_zero, up1, one_h);
  const auto wp_neumann_only =
      system.solve_nodal(system.outer_trace_values(up1), VectorX<double>::Zero(64));
  CHECK((wp.values - wp_neumann_only.values).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("perimeter second derivative is diagonal pi k^2 on the unit circle") {
  const auto unit = make_circle(1.0);
  HoldAll<double> big{2.0, 1.5, 0.1};
  const auto data = zero_data();
  for (Index k : {1L, 2L, 5L}) {
    const auto h = BoundaryField<double>::harmonic(k, false, 256);
    const double q = hessian_apply(unit, big, data, 1.0, h, kParams);
    CHECK(q == doctest::Approx(kPi * double(k * k)).epsilon(1e-8));
    const auto hs = BoundaryField<double>::harmonic(k, true, 256);
    CHECK(hessian_apply(unit, big, data, 1.0, hs, kParams) ==
          doctest::Approx(kPi * double(k * k)).epsilon(1e-8));
  }
  // h = 0 gives 0
  CHECK(hessian_apply(unit, big, data, 1.0, BoundaryField<double>::constant(0.0, 256),
                      kParams) == 0.0);
}

TEST_CASE("hessian quadratic form matches second differences near a critical shape") {
  auto truth = make_circle(0.5);
  truth.cos_coeffs[1] = 0.08;
  const auto data = inverse_crime_data(truth);

  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 3; ++trial) {
    TrigSeries<double> series;
    series.a.setZero(128);
    series.b.setZero(128);
    series.a0 = 0.3 * (2.0 * double(rng() >> 11) * 0x1.0p-53 - 1.0);
    for (Index k = 1; k <= 4; ++k) {
      series.a[k - 1] = (2.0 * double(rng() >> 11) * 0x1.0p-53 - 1.0) / double(k);
      series.b[k - 1] = (2.0 * double(rng() >> 11) * 0x1.0p-53 - 1.0) / double(k);
    }
    const auto h = BoundaryField<double>::from_series(series, 256);
    VectorX<double> direction = VectorX<double>::Zero(1 + 2 * truth.max_mode());
    direction[0] = series.a0;
    for (Index k = 1; k <= 4; ++k) {
      direction[k] = series.a[k - 1];
      direction[truth.max_mode() + k] = series.b[k - 1];
    }
    const double form = hessian_apply(truth, kDomain, data, 1e-3, h, kParams);
    const double fd = second_difference(truth, data, 1e-3, direction, 1e-3);
    CHECK(form == doctest::Approx(fd).epsilon(5e-2));
  }
}

TEST_CASE("assembled hessian: symmetry, positive decaying spectrum at the critical shape") {
  auto truth = make_circle(0.4);
  truth.cos_coeffs[1] = 0.08;
  const auto data = inverse_crime_data(truth, MeshParams<double>{32, 128});

  const auto spectrum =
      assemble_hessian(truth, kDomain, data, 0.0, 8, 0.0, MeshParams<double>{32, 128});
  CHECK(spectrum.basis_size == 17);
  CHECK(spectrum.symmetry_defect < 1e-8);
  CHECK((spectrum.matrix - spectrum.matrix.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(spectrum.eigenvalues[0] > 0.0);
  // sorted descending
  for (Index i = 1; i < spectrum.eigenvalues.size(); ++i)
    CHECK(spectrum.eigenvalues[i] <= spectrum.eigenvalues[i - 1]);
  // compact-operator signature
  CHECK(spectrum.eigenvalues[7] / spectrum.eigenvalues[0] < 1e-2);

  std::stringstream ss;
  save_hessian_spectrum(ss, spectrum);
  CHECK(ss.str().find("index,eigenvalue") != std::string::npos);
}

TEST_CASE("concentric spectrum: strict per-mode decay, log-concave, super-polynomial") {
  const auto truth = make_circle(0.4);
  const auto data = inverse_crime_data(truth, MeshParams<double>{32, 128});
  const auto spectrum =
      assemble_hessian(truth, kDomain, data, 0.0, 8, 0.0, MeshParams<double>{32, 128});

  // rotational symmetry pairs the cos/sin eigenvalues; collapse to per-mode
  // values lambda_m: index 0, then pairs
  std::vector<double> mode_value;
  mode_value.push_back(spectrum.eigenvalues[0]);
  for (Index m = 1; m <= 8; ++m) {
    const double a = spectrum.eigenvalues[2 * m - 1], b = spectrum.eigenvalues[2 * m];
    CHECK(a == doctest::Approx(b).epsilon(1e-6));
    mode_value.push_back(a);
  }
  for (std::size_t m = 2; m < mode_value.size(); ++m)
    CHECK(mode_value[m] < mode_value[m - 1]);
  // log-concavity: consecutive decay ratios do not increase
  for (std::size_t m = 2; m + 1 < mode_value.size(); ++m)
    CHECK(mode_value[m + 1] / mode_value[m] <= 1.02 * mode_value[m] / mode_value[m - 1]);
  // super-polynomial decay: the high-mode ratio beats k^(-4)
  CHECK(mode_value[8] / mode_value[1] < std::pow(8.0, -4.0));
}

TEST_CASE("eta-only hessian: rayleigh bound scales with eta, constants see no gain") {
  const auto data = zero_data();
  const auto circle = make_circle(0.5);
  const MeshParams<double> params{16, 64};

  // 1x1 basis, perimeter only: the constant mode has no tangential derivative
  const auto constant_only = assemble_hessian(circle, kDomain, data, 1e-2, 0, 0.0, params);
  CHECK(constant_only.basis_size == 1);
  CHECK(std::abs(constant_only.matrix(0, 0)) < 1e-12);

  const auto h1 = assemble_hessian(circle, kDomain, data, 1e-2, 8, 1.0, params);
  // lower bound >= eta * c_geom with c_geom = k^2 / (r0^2 (1+k^2)) bounded below
  const double c_geom = 1.0 / (2.0 * 0.5 * 0.5);
  CHECK(h1.rayleigh_lower_bound >= 0.0);
  // exclude the constant mode when measuring the oscillatory gain
  double min_osc = std::numeric_limits<double>::max();
  for (Index c = 1; c < h1.basis_size; ++c) min_osc = std::min(min_osc, h1.matrix(c, c));
  CHECK(min_osc >= 1e-2 * 0.9);  // eta k^2/(r0 pi(1+k^2)) * pi/r0 ... at least eta

  // monotone in eta
  double last = -1.0;
  for (double eta : {1e-4, 1e-3, 1e-2}) {
    const auto s = assemble_hessian(circle, kDomain, data, eta, 6, 1.0, params);
    CHECK(s.rayleigh_lower_bound >= last);
    last = s.rayleigh_lower_bound;
  }
  (void)c_geom;
}

TEST_CASE("hessian assembly rejects basis sizes beyond the shape band") {
  const auto data = zero_data();
  CHECK_THROWS_AS(
      (void)assemble_hessian(make_circle(0.5, 4), kDomain, data, 1e-2, 8, 1.0, kParams),
      std::invalid_argument);
}
