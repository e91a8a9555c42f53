#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "shapeinv/bessel.hpp"
#include "shapeinv/fem.hpp"

#include <cmath>

using namespace shapeinv;

namespace {

const double kPi = EIGEN_PI;
const HoldAll<double> kDomain{1.0, 0.8, 0.1};

// Independent reference for the radial benchmark: standard-library Bessel
// functions, solved for the same boundary conditions.
struct RadialOracle {
  double a_i0, b_k0;

  RadialOracle(double inner, double outer, double neumann) {
    const double i0 = std::cyl_bessel_i(0.0, inner), k0 = std::cyl_bessel_k(0.0, inner);
    const double i1 = std::cyl_bessel_i(1.0, outer), k1 = std::cyl_bessel_k(1.0, outer);
    const double det = -i0 * k1 - k0 * i1;
    a_i0 = -k0 * neumann / det;
    b_k0 = i0 * neumann / det;
  }
  double value(double rho) const {
    return a_i0 * std::cyl_bessel_i(0.0, rho) + b_k0 * std::cyl_bessel_k(0.0, rho);
  }
  double derivative(double rho) const {
    return a_i0 * std::cyl_bessel_i(1.0, rho) - b_k0 * std::cyl_bessel_k(1.0, rho);
  }
};

double bessel_l2_error(Index n_radial, Index n_angular) {
  const auto mesh = build_mesh(make_circle(0.5), kDomain, n_radial, n_angular);
  const FemSystem<double> system(mesh);
  const auto u = system.solve(BoundaryField<double>::constant(1.0, n_angular));
  const RadialOracle oracle(0.5, 1.0, 1.0);
  NodalField<double> err{&mesh, u.values}, exact{&mesh, u.values};
  for (Index k = 0; k < mesh.node_count(); ++k) {
    const double ex = oracle.value(mesh.node(k).norm());
    exact.values[k] = ex;
    err.values[k] = u.values[k] - ex;
  }
  return system.l2_norm(err) / system.l2_norm(exact);
}

}  // namespace

TEST_CASE("in-tree Bessel evaluations agree with the standard library") {
  for (double x : {0.1, 0.5, 0.7, 1.0, 1.8, 3.2}) {
    CHECK(bessel_i0(x) == doctest::Approx(std::cyl_bessel_i(0.0, x)).epsilon(1e-13));
    CHECK(bessel_i1(x) == doctest::Approx(std::cyl_bessel_i(1.0, x)).epsilon(1e-13));
    CHECK(bessel_k0(x) == doctest::Approx(std::cyl_bessel_k(0.0, x)).epsilon(1e-12));
    CHECK(bessel_k1(x) == doctest::Approx(std::cyl_bessel_k(1.0, x)).epsilon(1e-12));
    // Wronskian: I0 K1 + I1 K0 = 1/x
    CHECK(bessel_i0(x) * bessel_k1(x) + bessel_i1(x) * bessel_k0(x) ==
          doctest::Approx(1.0 / x).epsilon(1e-12));
  }
  const auto sol = solve_annulus_radial(0.5, 1.0, 1.0);
  CHECK(sol.value(0.5) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(sol.radial_derivative(1.0) == doctest::Approx(1.0).epsilon(1e-13));
  const RadialOracle oracle(0.5, 1.0, 1.0);
  CHECK(sol.value(0.8) == doctest::Approx(oracle.value(0.8)).epsilon(1e-12));
}

TEST_CASE("state solve matches the radial benchmark and converges at order 2") {
  const double e_coarse = bessel_l2_error(16, 64);
  const double e_mid = bessel_l2_error(32, 128);
  CHECK(e_mid < 2e-3);
  CHECK(std::log2(e_coarse / e_mid) >= 1.9);
}

TEST_CASE("zero data gives the zero solution; the solve is linear") {
  const auto mesh = build_mesh(make_circle(0.5), kDomain, 8, 32);
  const FemSystem<double> system(mesh);
  const auto u0 = system.solve(BoundaryField<double>::constant(0.0, 32));
  CHECK(u0.values.cwiseAbs().maxCoeff() == 0.0);

  const auto g = BoundaryField<double>::harmonic(2, false, 32);
  const auto u1 = system.solve(g);
  const auto u3 = system.solve(BoundaryField<double>(3.0 * g.values()));
  CHECK((u3.values - 3.0 * u1.values).norm() <= 1e-12 * u3.values.norm());
}

TEST_CASE("outer trace extraction") {
  auto shape = make_circle(0.5);
  const auto mesh = build_mesh(shape, kDomain, 16, 64);
  const FemSystem<double> system(mesh);

  // constant nodal field traces to the constant
  NodalField<double> c{&mesh, VectorX<double>::Constant(mesh.node_count(), 2.5)};
  const auto tc = outer_trace(c);
  CHECK((tc.values().array() - 2.5).abs().maxCoeff() <= 1e-15);

  // coordinate function x1
  NodalField<double> x1{&mesh, mesh.nodes.col(0)};
  const auto tx = outer_trace(x1);
  for (Index j = 0; j < 64; ++j)
    CHECK(tx.values()[j] ==
          doctest::Approx(kDomain.outer_radius * std::cos(mesh.theta_of(j))).epsilon(1e-12));

  // radial solution traces to the constant u(1)
  const auto u = system.solve(BoundaryField<double>::constant(1.0, 64));
  const RadialOracle oracle(0.5, 1.0, 1.0);
  const auto tu = outer_trace(u);
  for (Index j = 0; j < 64; ++j)
    CHECK(tu.values()[j] == doctest::Approx(oracle.value(1.0)).epsilon(5e-3));
}

TEST_CASE("variational flux recovery on the radial benchmark") {
  const RadialOracle oracle(0.5, 1.0, 1.0);
  const double exact_flux = oracle.derivative(0.5);  // along the outward normal
  CHECK(exact_flux > 0.0);

  auto flux_error = [&](Index nr, Index na) {
    const auto mesh = build_mesh(make_circle(0.5), kDomain, nr, na);
    const FemSystem<double> system(mesh);
    const auto u = system.solve(BoundaryField<double>::constant(1.0, na));
    const auto q = system.inner_flux(u);
    return (q.values().array() - exact_flux).abs().maxCoeff() / std::abs(exact_flux);
  };
  const double e1 = flux_error(32, 128);
  CHECK(e1 < 1e-2);
  const double e2 = flux_error(64, 256);
  CHECK(e2 <= e1 / 3.0);

  // zero field has zero flux
  const auto mesh = build_mesh(make_circle(0.5), kDomain, 8, 32);
  const FemSystem<double> system(mesh);
  NodalField<double> zero{&mesh, VectorX<double>::Zero(mesh.node_count())};
  CHECK(system.inner_flux(zero).values().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("energy identity and discrete maximum principle") {
  auto shape = oracle::random_shape(17, 0.5, 0.05);
  const auto mesh = build_mesh(shape, kDomain, 16, 64);
  const FemSystem<double> system(mesh);
  const auto g = BoundaryField<double>::constant(1.0, 64);
  const auto u = system.solve(g);

  const VectorX<double> trace = system.outer_trace_values(u);
  const VectorX<double> g_nodal = system.sample_at_mesh_angles(g);
  const double boundary_work = system.inner_product_outer(g_nodal, trace);
  CHECK(system.energy(u) == doctest::Approx(boundary_work).epsilon(1e-8));

  CHECK(u.values.minCoeff() >= -1e-12);  // nonnegative data, zero inner values

  const auto conc = build_mesh(make_circle(0.5), kDomain, 16, 64);
  const FemSystem<double> sys2(conc);
  const auto u2 = sys2.solve(BoundaryField<double>::constant(1.0, 64));
  CHECK(u2.values.minCoeff() >= 0.0);
}

TEST_CASE("system matrix is symmetric positive definite") {
  const auto mesh = build_mesh(make_circle(0.5), kDomain, 8, 32);
  const FemSystem<double> system(mesh);
  const auto& A = system.full_matrix();
  const Eigen::SparseMatrix<double> diff = Eigen::SparseMatrix<double>(A.transpose()) - A;
  CHECK(diff.coeffs().cwiseAbs().maxCoeff() <= 1e-14);
  // positive definiteness via random Rayleigh quotients
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 8; ++trial) {
    VectorX<double> v(A.rows());
    for (Index i = 0; i < v.size(); ++i) v[i] = 2.0 * double(rng() >> 11) * 0x1.0p-53 - 1.0;
    CHECK(v.dot(A * v) > 0.0);
  }
}

TEST_CASE("uniform H1 bound over random admissible shapes at fixed data") {
  // discrete counterpart of ||u||_H1 <= ||g_N||: the energy stays bounded
  // by a fixed constant across the family
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto shape = oracle::random_shape(seed, 0.45 + 0.02 * double(seed % 3), 0.05);
    const auto mesh = build_mesh(shape, kDomain, 16, 64);
    const FemSystem<double> system(mesh);
    const auto u = system.solve(BoundaryField<double>::constant(1.0, 64));
    worst = std::max(worst, std::sqrt(system.energy(u)));
  }
  // ||g_N||_{H^{-1/2}} for g_N = 1 on the unit circle is sqrt(2 pi)
  CHECK(worst <= std::sqrt(2.0 * kPi));
}

TEST_CASE("inhomogeneous inner Dirichlet data is imposed exactly at the nodes") {
  const auto mesh = build_mesh(make_circle(0.5), kDomain, 8, 32);
  const FemSystem<double> system(mesh);
  const auto d = BoundaryField<double>::harmonic(1, false, 32);
  const auto u = system.solve(BoundaryField<double>::constant(0.0, 32), d);
  for (Index j = 0; j < 32; ++j)
    CHECK(u.values[mesh.inner_boundary[j]] ==
          doctest::Approx(std::cos(mesh.theta_of(j))).epsilon(1e-14));
}

TEST_CASE("solver failure reports the residual") {
  const auto mesh = build_mesh(make_circle(0.5), kDomain, 16, 64);
  FemSystem<double>::Options opts;
  opts.cg_tolerance = 1e-14;
  opts.max_iterations = 3;  // far too few: must report non-convergence
  const FemSystem<double> system(mesh, opts);
  CHECK_THROWS_WITH_AS((void)system.solve(BoundaryField<double>::constant(1.0, 64)),
                       doctest::Contains("residual"), SolveFailure);
}
