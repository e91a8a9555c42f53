#pragma once

#include "shapeinv/geometry.hpp"
#include "shapeinv/mesh.hpp"
#include "shapeinv/types.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <vector>

namespace shapeinv {

/// P1 nodal function on a mesh. Non-owning: the mesh must outlive the field.
template <typename Scalar>
struct NodalField {
  const AnnularMesh<Scalar>* mesh = nullptr;
  VectorX<Scalar> values;
};

struct SolveFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Assembled P1 system for -laplace(u) + u on an annular mesh, with Neumann
/// data on the outer circle and Dirichlet data on the obstacle boundary.
///
/// Discrete conventions, chosen so that adjoint identities hold to solver
/// tolerance: Neumann loads are P1 boundary-mass products of nodal data, the
/// boundary misfit is measured in the same P1 boundary mass, and the inner
/// flux is recovered variationally from the residual moments of the full
/// matrix (M q = -m). The reduced system is SPD and solved by diagonally
/// preconditioned conjugate gradients.
///
/// The system keeps a reference to the caller's mesh; solves on one system
/// must not run concurrently, but independent systems are safe in parallel.
template <typename Scalar>
class FemSystem {
 public:
  struct Options {
    Scalar cg_tolerance = Scalar(1e-10);
    Index max_iterations = 0;  // 0: use the 50 sqrt(n_nodes) default
  };

  explicit FemSystem(const AnnularMesh<Scalar>& mesh, Options options = {})
      : mesh_(&mesh), options_(options) {
    assemble();
  }
  FemSystem(AnnularMesh<Scalar>&&, Options = {}) = delete;

  const AnnularMesh<Scalar>& mesh() const { return *mesh_; }
  const Eigen::SparseMatrix<Scalar>& full_matrix() const { return full_; }

  /// Nodal samples of a boundary field at the mesh angles (shared by both
  /// boundary rings).
  VectorX<Scalar> sample_at_mesh_angles(const BoundaryField<Scalar>& f) const {
    VectorX<Scalar> v(mesh_->n_angular);
    for (Index j = 0; j < mesh_->n_angular; ++j) v[j] = f(mesh_->theta_of(j));
    return v;
  }

  NodalField<Scalar> solve_nodal(const VectorX<Scalar>& neumann_outer,
                                 const VectorX<Scalar>& dirichlet_inner) const {
    const Index na = mesh_->n_angular;
    detail::require(neumann_outer.size() == na && dirichlet_inner.size() == na,
                    "FemSystem::solve_nodal: boundary data size mismatch");
    const Index n_free = free_count();
    VectorX<Scalar> rhs = VectorX<Scalar>::Zero(n_free);
    const VectorX<Scalar> load = outer_mass_ * neumann_outer;
    for (Index j = 0; j < na; ++j) rhs[mesh_->outer_boundary[j] - na] += load[j];
    rhs.noalias() -= coupling_ * dirichlet_inner;

    Eigen::ConjugateGradient<Eigen::SparseMatrix<Scalar>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(options_.cg_tolerance);
    cg.setMaxIterations(options_.max_iterations > 0
                            ? options_.max_iterations
                            : Index(Scalar(50) * std::sqrt(Scalar(mesh_->node_count()))) + 10);
    cg.compute(free_);
    VectorX<Scalar> x = cg.solve(rhs);
    if (cg.info() != Eigen::Success)
      throw SolveFailure("FemSystem: CG failed to converge, relative residual " +
                         std::to_string(double(cg.error())) + " after " +
                         std::to_string(long(cg.iterations())) + " iterations");

    NodalField<Scalar> u;
    u.mesh = mesh_;
    u.values.resize(mesh_->node_count());
    u.values.head(na) = dirichlet_inner;
    u.values.tail(n_free) = x;
    return u;
  }

  NodalField<Scalar> solve(const BoundaryField<Scalar>& g_neumann,
                           const BoundaryField<Scalar>& inner_dirichlet) const {
    return solve_nodal(sample_at_mesh_angles(g_neumann), sample_at_mesh_angles(inner_dirichlet));
  }

  /// Solve with zero Dirichlet data on the obstacle.
  NodalField<Scalar> solve(const BoundaryField<Scalar>& g_neumann) const {
    return solve_nodal(sample_at_mesh_angles(g_neumann), VectorX<Scalar>::Zero(mesh_->n_angular));
  }

  VectorX<Scalar> outer_trace_values(const NodalField<Scalar>& u) const {
    VectorX<Scalar> t(mesh_->n_angular);
    for (Index j = 0; j < mesh_->n_angular; ++j) t[j] = u.values[mesh_->outer_boundary[j]];
    return t;
  }

  /// Residual moments of the full bilinear form at the inner-boundary rows;
  /// equal to minus the weak normal flux moments for any solved field whose
  /// load vanishes there.
  VectorX<Scalar> inner_flux_moments(const NodalField<Scalar>& u) const {
    const VectorX<Scalar> au = full_ * u.values;
    return au.head(mesh_->n_angular);
  }

  /// Pointwise normal flux on the obstacle boundary, oriented out of the
  /// obstacle, recovered from M q = -m.
  BoundaryField<Scalar> inner_flux(const NodalField<Scalar>& u) const {
    VectorX<Scalar> q = inner_mass_solver_.solve((-inner_flux_moments(u)).eval());
    return BoundaryField<Scalar>(std::move(q), mesh_->phase);
  }

  /// a' M b with the P1 mass of the inner boundary polygon.
  Scalar inner_product_inner(const VectorX<Scalar>& a, const VectorX<Scalar>& b) const {
    return a.dot(inner_mass_ * b);
  }

  VectorX<Scalar> inner_mass_apply(const VectorX<Scalar>& v) const { return inner_mass_ * v; }

  /// a' M b with the P1 mass of the outer boundary polygon.
  Scalar inner_product_outer(const VectorX<Scalar>& a, const VectorX<Scalar>& b) const {
    return a.dot(outer_mass_ * b);
  }

  /// Dirichlet energy + mass of a nodal field: u' A u.
  Scalar energy(const NodalField<Scalar>& u) const { return u.values.dot(full_ * u.values); }

  /// L2 norm over the mesh of a nodal field (consistent P1 mass).
  Scalar l2_norm(const NodalField<Scalar>& u) const {
    return std::sqrt(u.values.dot(volume_mass_ * u.values));
  }

 private:
  Index free_count() const { return mesh_->node_count() - mesh_->n_angular; }

  void assemble() {
    const auto& mesh = *mesh_;
    const Index n = mesh.node_count();
    const Index na = mesh.n_angular;
    std::vector<Eigen::Triplet<Scalar>> trip, trip_mass;
    trip.reserve(9 * mesh.triangle_count());
    trip_mass.reserve(9 * mesh.triangle_count());

    for (Index t = 0; t < mesh.triangle_count(); ++t) {
      const int idx[3] = {mesh.triangles(t, 0), mesh.triangles(t, 1), mesh.triangles(t, 2)};
      const Vector2<Scalar> p0 = mesh.node(idx[0]);
      const Vector2<Scalar> p1 = mesh.node(idx[1]);
      const Vector2<Scalar> p2 = mesh.node(idx[2]);
      const Scalar det = (p1.x() - p0.x()) * (p2.y() - p0.y()) -
                         (p1.y() - p0.y()) * (p2.x() - p0.x());
      const Scalar area = det / Scalar(2);
      const Vector2<Scalar> grad[3] = {
          Vector2<Scalar>(p1.y() - p2.y(), p2.x() - p1.x()) / det,
          Vector2<Scalar>(p2.y() - p0.y(), p0.x() - p2.x()) / det,
          Vector2<Scalar>(p0.y() - p1.y(), p1.x() - p0.x()) / det};
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          const Scalar stiff = area * grad[a].dot(grad[b]);
          const Scalar mass = area / Scalar(12) * (a == b ? Scalar(2) : Scalar(1));
          trip.emplace_back(idx[a], idx[b], stiff + mass);
          trip_mass.emplace_back(idx[a], idx[b], mass);
        }
    }
    full_.resize(n, n);
    full_.setFromTriplets(trip.begin(), trip.end());
    volume_mass_.resize(n, n);
    volume_mass_.setFromTriplets(trip_mass.begin(), trip_mass.end());

    // Reduced blocks: inner-boundary nodes are exactly the first ring.
    const Index n_free = n - na;
    std::vector<Eigen::Triplet<Scalar>> tf, tc;
    for (Index col = 0; col < full_.outerSize(); ++col)
      for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(full_, col); it; ++it) {
        const Index r = it.row(), c = it.col();
        if (r >= na && c >= na)
          tf.emplace_back(r - na, c - na, it.value());
        else if (r >= na && c < na)
          tc.emplace_back(r - na, c, it.value());
      }
    free_.resize(n_free, n_free);
    free_.setFromTriplets(tf.begin(), tf.end());
    coupling_.resize(n_free, na);
    coupling_.setFromTriplets(tc.begin(), tc.end());

    inner_mass_ = ring_mass(mesh.inner_boundary);
    outer_mass_ = ring_mass(mesh.outer_boundary);
    inner_mass_solver_.compute(inner_mass_);
    detail::require(inner_mass_solver_.info() == Eigen::Success,
                    "FemSystem: inner boundary mass factorization failed");
  }

  Eigen::SparseMatrix<Scalar> ring_mass(const std::vector<Index>& ring) const {
    const Index m = Index(ring.size());
    std::vector<Eigen::Triplet<Scalar>> trip;
    trip.reserve(4 * m);
    for (Index j = 0; j < m; ++j) {
      const Index k = (j + 1) % m;
      const Scalar len = (mesh_->node(ring[k]) - mesh_->node(ring[j])).norm();
      trip.emplace_back(j, j, len / Scalar(3));
      trip.emplace_back(k, k, len / Scalar(3));
      trip.emplace_back(j, k, len / Scalar(6));
      trip.emplace_back(k, j, len / Scalar(6));
    }
    Eigen::SparseMatrix<Scalar> mass(m, m);
    mass.setFromTriplets(trip.begin(), trip.end());
    return mass;
  }

  const AnnularMesh<Scalar>* mesh_;
  Options options_;
  Eigen::SparseMatrix<Scalar> full_;
  Eigen::SparseMatrix<Scalar> volume_mass_;
  Eigen::SparseMatrix<Scalar> free_;
  Eigen::SparseMatrix<Scalar> coupling_;
  Eigen::SparseMatrix<Scalar> inner_mass_;
  Eigen::SparseMatrix<Scalar> outer_mass_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<Scalar>> inner_mass_solver_;
};

/// One-shot state solve: -laplace(u) + u = 0 with du/dnu = g_N on the outer
/// circle and u = inner_dirichlet on the obstacle boundary.
template <typename Scalar>
NodalField<Scalar> solve_state(const AnnularMesh<Scalar>& mesh, const BoundaryField<Scalar>& g_N,
                               const BoundaryField<Scalar>& inner_dirichlet) {
  FemSystem<Scalar> system(mesh);
  return system.solve(g_N, inner_dirichlet);
}

/// Values of a nodal field on the outer circle, reindexed to the angular grid.
template <typename Scalar>
BoundaryField<Scalar> outer_trace(const NodalField<Scalar>& u) {
  detail::require(u.mesh != nullptr, "outer_trace: field has no mesh");
  const auto& mesh = *u.mesh;
  VectorX<Scalar> t(mesh.n_angular);
  for (Index j = 0; j < mesh.n_angular; ++j) t[j] = u.values[mesh.outer_boundary[j]];
  return BoundaryField<Scalar>(std::move(t), mesh.phase);
}

/// Variationally recovered normal flux on the obstacle boundary (outward of
/// the obstacle). Reassembles the system; prefer FemSystem::inner_flux when
/// one is already at hand.
template <typename Scalar>
BoundaryField<Scalar> inner_flux(const NodalField<Scalar>& u) {
  detail::require(u.mesh != nullptr, "inner_flux: field has no mesh");
  FemSystem<Scalar> system(*u.mesh);
  return system.inner_flux(u);
}

namespace detail {

template <typename Scalar>
bool triangle_eval(const AnnularMesh<Scalar>& mesh, const VectorX<Scalar>& values, Index t,
                   const Vector2<Scalar>& x, Scalar& out) {
  const Vector2<Scalar> p0 = mesh.node(mesh.triangles(t, 0));
  const Vector2<Scalar> p1 = mesh.node(mesh.triangles(t, 1));
  const Vector2<Scalar> p2 = mesh.node(mesh.triangles(t, 2));
  const Scalar det = (p1.x() - p0.x()) * (p2.y() - p0.y()) -
                     (p1.y() - p0.y()) * (p2.x() - p0.x());
  const Scalar l1 = ((x.x() - p0.x()) * (p2.y() - p0.y()) -
                     (x.y() - p0.y()) * (p2.x() - p0.x())) / det;
  const Scalar l2 = ((p1.x() - p0.x()) * (x.y() - p0.y()) -
                     (p1.y() - p0.y()) * (x.x() - p0.x())) / det;
  const Scalar l0 = Scalar(1) - l1 - l2;
  const Scalar tol = Scalar(-1e-12);
  if (l0 < tol || l1 < tol || l2 < tol) return false;
  out = l0 * values[mesh.triangles(t, 0)] + l1 * values[mesh.triangles(t, 1)] +
        l2 * values[mesh.triangles(t, 2)];
  return true;
}

}  // namespace detail

/// P1 evaluation of a nodal field at a physical point of the annulus. The
/// angular cell is located directly; the radial one by scanning the column.
template <typename Scalar>
Scalar interpolate(const NodalField<Scalar>& u, const Vector2<Scalar>& x) {
  detail::require(u.mesh != nullptr, "interpolate: field has no mesh");
  const auto& mesh = *u.mesh;
  Scalar theta = std::atan2(x.y(), x.x()) - mesh.phase;
  theta -= std::floor(theta / two_pi<Scalar>()) * two_pi<Scalar>();
  const Index j0 = Index(theta / two_pi<Scalar>() * Scalar(mesh.n_angular)) % mesh.n_angular;
  Scalar out;
  for (const Index dj : {Index(0), Index(mesh.n_angular - 1), Index(1)}) {
    const Index j = (j0 + dj) % mesh.n_angular;
    for (Index i = 0; i < mesh.n_radial; ++i) {
      const Index t = 2 * (i * mesh.n_angular + j);
      if (detail::triangle_eval(mesh, u.values, t, x, out)) return out;
      if (detail::triangle_eval(mesh, u.values, t + 1, x, out)) return out;
    }
  }
  throw std::invalid_argument("interpolate: point outside the meshed annulus");
}

}  // namespace shapeinv
