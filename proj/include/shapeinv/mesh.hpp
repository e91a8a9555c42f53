#pragma once

#include "shapeinv/geometry.hpp"
#include "shapeinv/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace shapeinv {

/// Boundary-fitted triangulation of the annulus between the obstacle curve and
/// the outer circle. Nodes sit on the polar-mapped structured grid
/// x(rho_i, theta_j) = ((1 - rho_i) r(theta_j) + rho_i R) (cos theta_j, sin theta_j),
/// each quad split along the (i,j)-(i+1,j+1) diagonal. Construction is
/// deterministic; meshes are immutable once built.
template <typename Scalar>
struct AnnularMesh {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 2> nodes;
  Eigen::Matrix<int, Eigen::Dynamic, 3> triangles;  // CCW node index triples
  std::vector<Index> inner_boundary;                // ring i = 0, ordered by angle
  std::vector<Index> outer_boundary;                // ring i = n_radial
  Index n_radial = 0;
  Index n_angular = 0;
  Scalar phase = Scalar(0);
  Scalar outer_radius = Scalar(1);

  Index node_count() const { return nodes.rows(); }
  Index triangle_count() const { return triangles.rows(); }

  Index node_index(Index i, Index j) const { return i * n_angular + (j % n_angular); }

  Scalar theta_of(Index j) const {
    return phase + two_pi<Scalar>() * Scalar(j % n_angular) / Scalar(n_angular);
  }

  Vector2<Scalar> node(Index k) const { return nodes.row(k).transpose(); }
};

template <typename Scalar>
Scalar triangle_area(const AnnularMesh<Scalar>& mesh, Index t) {
  const auto a = mesh.node(mesh.triangles(t, 0));
  const auto b = mesh.node(mesh.triangles(t, 1));
  const auto c = mesh.node(mesh.triangles(t, 2));
  return Scalar(0.5) * ((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()));
}

/// Angular phase used by data-synthesis meshes so their nodes interleave with
/// reconstruction meshes.
template <typename Scalar>
Scalar half_cell_phase(Index n_angular) {
  return Scalar(EIGEN_PI) / Scalar(n_angular);
}

template <typename Scalar>
AnnularMesh<Scalar> build_mesh(const RadialShape<Scalar>& shape, const HoldAll<Scalar>& domain,
                               Index n_radial, Index n_angular, Scalar grading = Scalar(1),
                               Scalar phase = Scalar(0)) {
  domain.validate();
  detail::require(n_radial >= 2, "build_mesh: n_radial must be >= 2");
  detail::require(n_angular >= 8, "build_mesh: n_angular must be >= 8");
  detail::require(n_angular >= 4 * effective_max_mode(shape),
                  "build_mesh: n_angular must be >= 4 * the shape's highest active mode");
  detail::require(grading > Scalar(0), "build_mesh: grading must be positive");

  AnnularMesh<Scalar> mesh;
  mesh.n_radial = n_radial;
  mesh.n_angular = n_angular;
  mesh.phase = phase;
  mesh.outer_radius = domain.outer_radius;
  mesh.nodes.resize((n_radial + 1) * n_angular, 2);

  // Radial grid in [0,1]; geometric grading refines toward the obstacle.
  VectorX<Scalar> rho(n_radial + 1);
  if (grading == Scalar(1)) {
    for (Index i = 0; i <= n_radial; ++i) rho[i] = Scalar(i) / Scalar(n_radial);
  } else {
    const Scalar denom = std::pow(grading, Scalar(n_radial)) - Scalar(1);
    for (Index i = 0; i <= n_radial; ++i)
      rho[i] = (std::pow(grading, Scalar(i)) - Scalar(1)) / denom;
  }

  for (Index j = 0; j < n_angular; ++j) {
    const Scalar theta = mesh.theta_of(j);
    const Scalar r = radius_at(shape, theta);
    detail::require(r > Scalar(0) && r < domain.outer_radius,
                    "build_mesh: obstacle radius out of range at a mesh angle");
    const Scalar c = std::cos(theta), s = std::sin(theta);
    for (Index i = 0; i <= n_radial; ++i) {
      const Scalar rad = (Scalar(1) - rho[i]) * r + rho[i] * domain.outer_radius;
      mesh.nodes(mesh.node_index(i, j), 0) = shape.center.x() * (Scalar(1) - rho[i]) + rad * c;
      mesh.nodes(mesh.node_index(i, j), 1) = shape.center.y() * (Scalar(1) - rho[i]) + rad * s;
    }
  }

  mesh.triangles.resize(2 * n_radial * n_angular, 3);
  Index t = 0;
  for (Index i = 0; i < n_radial; ++i) {
    for (Index j = 0; j < n_angular; ++j) {
      const int n00 = int(mesh.node_index(i, j));
      const int n10 = int(mesh.node_index(i + 1, j));
      const int n11 = int(mesh.node_index(i + 1, j + 1));
      const int n01 = int(mesh.node_index(i, j + 1));
      mesh.triangles.row(t++) << n00, n10, n11;
      mesh.triangles.row(t++) << n00, n11, n01;
    }
  }

  mesh.inner_boundary.resize(n_angular);
  mesh.outer_boundary.resize(n_angular);
  for (Index j = 0; j < n_angular; ++j) {
    mesh.inner_boundary[j] = mesh.node_index(0, j);
    mesh.outer_boundary[j] = mesh.node_index(n_radial, j);
  }

  for (Index k = 0; k < mesh.triangle_count(); ++k)
    detail::require(triangle_area(mesh, k) > Scalar(0), "build_mesh: nonpositive triangle area");
  return mesh;
}

template <typename Scalar>
struct MeshQuality {
  Scalar min_angle_deg = Scalar(0);
  Scalar max_aspect = Scalar(0);
};

template <typename Scalar>
MeshQuality<Scalar> mesh_quality(const AnnularMesh<Scalar>& mesh) {
  MeshQuality<Scalar> q;
  q.min_angle_deg = Scalar(180);
  q.max_aspect = Scalar(1);
  for (Index t = 0; t < mesh.triangle_count(); ++t) {
    Vector2<Scalar> p[3] = {mesh.node(mesh.triangles(t, 0)), mesh.node(mesh.triangles(t, 1)),
                            mesh.node(mesh.triangles(t, 2))};
    Scalar emin = std::numeric_limits<Scalar>::max(), emax = Scalar(0);
    for (int v = 0; v < 3; ++v) {
      const Vector2<Scalar> e1 = p[(v + 1) % 3] - p[v];
      const Vector2<Scalar> e2 = p[(v + 2) % 3] - p[v];
      const Scalar angle = std::acos(std::clamp(e1.dot(e2) / (e1.norm() * e2.norm()),
                                                Scalar(-1), Scalar(1)));
      q.min_angle_deg = std::min(q.min_angle_deg, angle * Scalar(180) / Scalar(EIGEN_PI));
      const Scalar len = e1.norm();
      emin = std::min(emin, len);
      emax = std::max(emax, len);
    }
    q.max_aspect = std::max(q.max_aspect, emax / emin);
  }
  return q;
}

template <typename Scalar>
Scalar mesh_area(const AnnularMesh<Scalar>& mesh) {
  Scalar acc = Scalar(0);
  for (Index t = 0; t < mesh.triangle_count(); ++t) acc += triangle_area(mesh, t);
  return acc;
}

/// Exact annulus area (1/2) integral (R^2 - r(theta)^2) d.theta by the
/// periodic trapezoid rule on a dense grid.
template <typename Scalar>
Scalar annulus_area(const RadialShape<Scalar>& shape, Scalar outer_radius,
                    Index n_samples = 4096) {
  Scalar acc = Scalar(0);
  for (Index j = 0; j < n_samples; ++j) {
    const Scalar r = radius_at(shape, two_pi<Scalar>() * Scalar(j) / Scalar(n_samples));
    acc += outer_radius * outer_radius - r * r;
  }
  return Scalar(0.5) * acc * two_pi<Scalar>() / Scalar(n_samples);
}

}  // namespace shapeinv
