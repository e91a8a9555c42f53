#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "shapeinv/mesh.hpp"

#include <cmath>
#include <map>

using namespace shapeinv;

namespace {
const double kPi = EIGEN_PI;
const HoldAll<double> kDomain{1.0, 0.8, 0.1};
}

TEST_CASE("node and triangle counts, positive areas") {
  const auto mesh = build_mesh(make_circle(0.5), kDomain, 2, 8);
  CHECK(mesh.node_count() == 24);
  CHECK(mesh.triangle_count() == 32);
  for (Index t = 0; t < mesh.triangle_count(); ++t) CHECK(triangle_area(mesh, t) > 0.0);
}

TEST_CASE("boundary nodes sit on their curves, ordered counter-clockwise") {
  auto shape = make_circle(0.5);
  shape.cos_coeffs[1] = 0.1;
  const auto mesh = build_mesh(shape, kDomain, 8, 64);
  CHECK(mesh.inner_boundary.size() == 64);
  CHECK(mesh.outer_boundary.size() == 64);
  for (Index j = 0; j < 64; ++j) {
    const double theta = mesh.theta_of(j);
    const auto p = mesh.node(mesh.inner_boundary[j]);
    CHECK((p - boundary_point(shape, theta)).norm() <= 1e-12);
    CHECK(std::abs(mesh.node(mesh.outer_boundary[j]).norm() - kDomain.outer_radius) <= 1e-12);
  }
  // CCW ordering: the polygon enclosed by each ring has positive signed area
  auto ring_area = [&](const std::vector<Index>& ring) {
    double acc = 0;
    for (std::size_t j = 0; j < ring.size(); ++j) {
      const auto a = mesh.node(ring[j]);
      const auto b = mesh.node(ring[(j + 1) % ring.size()]);
      acc += a.x() * b.y() - a.y() * b.x();
    }
    return acc / 2;
  };
  CHECK(ring_area(mesh.inner_boundary) > 0.0);
  CHECK(ring_area(mesh.outer_boundary) > 0.0);
}

TEST_CASE("mesh is conforming: interior edges shared by exactly two triangles") {
  const auto mesh = build_mesh(make_circle(0.5), kDomain, 4, 16);
  std::map<std::pair<int, int>, int> edge_count;
  for (Index t = 0; t < mesh.triangle_count(); ++t)
    for (int v = 0; v < 3; ++v) {
      int a = mesh.triangles(t, v), b = mesh.triangles(t, (v + 1) % 3);
      if (a > b) std::swap(a, b);
      ++edge_count[{a, b}];
    }
  Index boundary_edges = 0;
  for (const auto& [edge, count] : edge_count) {
    CHECK(count <= 2);
    if (count == 1) ++boundary_edges;
  }
  CHECK(boundary_edges == 2 * mesh.n_angular);
}

TEST_CASE("mesh area approaches the annulus area at second order") {
  // concentric annulus: exact area pi (1 - 1/4)
  const auto mesh = build_mesh(make_circle(0.5), kDomain, 16, 64);
  const double exact = 3.0 * kPi / 4.0;
  CHECK(std::abs(mesh_area(mesh) - exact) / exact < 2e-3);

  auto shape = make_circle(0.5);
  shape.cos_coeffs[1] = 0.1;
  const auto wavy = build_mesh(shape, kDomain, 16, 64);
  const double quad = annulus_area(shape, kDomain.outer_radius);
  CHECK(std::abs(mesh_area(wavy) - quad) / quad < 2e-3);

  // observed order across two refinements
  const double e1 =
      std::abs(mesh_area(build_mesh(shape, kDomain, 16, 64)) - quad);
  const double e2 =
      std::abs(mesh_area(build_mesh(shape, kDomain, 32, 128)) - quad);
  CHECK(std::log2(e1 / e2) >= 1.9);
}

TEST_CASE("deterministic construction") {
  auto shape = oracle::random_shape(3, 0.5, 0.05);
  const auto m1 = build_mesh(shape, kDomain, 8, 32);
  const auto m2 = build_mesh(shape, kDomain, 8, 32);
  CHECK((m1.nodes - m2.nodes).cwiseAbs().maxCoeff() == 0.0);
  CHECK((m1.triangles - m2.triangles).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("mesh quality") {
  const auto q = mesh_quality(build_mesh(make_circle(0.5), kDomain, 8, 32));
  CHECK(q.min_angle_deg > 15.0);
  CHECK(q.max_aspect < 4.0);

  auto spiky = make_circle(0.5);
  spiky.cos_coeffs[7] = 0.25;  // a_8 oscillation on a coarse mesh
  const auto bad = mesh_quality(build_mesh(spiky, kDomain, 4, 32));
  CHECK(bad.min_angle_deg < 15.0);
}

TEST_CASE("grading refines toward the obstacle") {
  const auto graded = build_mesh(make_circle(0.5), kDomain, 8, 32, 1.3);
  const auto uniform = build_mesh(make_circle(0.5), kDomain, 8, 32, 1.0);
  auto first_layer = [](const AnnularMesh<double>& m) {
    return (m.node(m.node_index(1, 0)) - m.node(m.node_index(0, 0))).norm();
  };
  CHECK(first_layer(graded) < first_layer(uniform));
  CHECK(std::abs(mesh_area(graded) - mesh_area(uniform)) < 1e-3);
}

TEST_CASE("invalid inputs are rejected") {
  CHECK_THROWS_AS((void)build_mesh(make_circle(0.5), kDomain, 1, 32), std::invalid_argument);
  CHECK_THROWS_AS((void)build_mesh(make_circle(0.5), kDomain, 4, 4), std::invalid_argument);
  // radius exceeding the outer circle at some angle
  auto huge = make_circle(0.95);
  huge.cos_coeffs[0] = 0.2;
  CHECK_THROWS_AS((void)build_mesh(huge, kDomain, 4, 64), std::invalid_argument);
  // n_angular below the anti-aliasing bound for the shape's active band
  auto high_mode = make_circle(0.5, 16);
  high_mode.sin_coeffs[15] = 0.01;
  CHECK_THROWS_AS((void)build_mesh(high_mode, kDomain, 4, 32), std::invalid_argument);
}
