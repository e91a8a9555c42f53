#pragma once

#include "shapeinv/fem.hpp"
#include "shapeinv/geometry.hpp"
#include "shapeinv/mesh.hpp"
#include "shapeinv/types.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace shapeinv {

/// Mesh resolution bundle used by every functional evaluation.
template <typename Scalar>
struct MeshParams {
  Index n_radial = 32;
  Index n_angular = 128;
  Scalar grading = Scalar(1);
  Scalar phase = Scalar(0);

  MeshParams refined(Index factor) const {
    MeshParams p = *this;
    p.n_radial *= factor;
    p.n_angular *= factor;
    return p;
  }
};

/// Neumann datum and Dirichlet measurement on the outer circle, both stored on
/// the canonical angular data grid.
template <typename Scalar>
struct CauchyData {
  BoundaryField<Scalar> g_N;
  BoundaryField<Scalar> g_D;
  Scalar noise_level = Scalar(0);
  std::uint64_t seed = 0;
  Index fine_factor = 0;  // 0 for data not produced by synthesize_data

  /// A usable measurement pair carries at least one nonzero datum.
  void validate() const {
    const bool trivial = g_N.values().isZero(Scalar(0)) && g_D.values().isZero(Scalar(0));
    detail::require(!trivial, "CauchyData: Cauchy pair is identically zero");
  }
};

template <typename Scalar>
struct ObjectiveValue {
  Scalar misfit = Scalar(0);
  Scalar perimeter = Scalar(0);  // obstacle part plus the fixed outer circle
  Scalar eta = Scalar(0);
  Scalar total = Scalar(0);
};

/// Relative perimeter of the annulus: obstacle boundary length plus the fixed
/// outer circle (a constant that cancels in differences and derivatives).
template <typename Scalar>
Scalar relative_perimeter(const RadialShape<Scalar>& shape, const HoldAll<Scalar>& domain) {
  return perimeter(shape) + two_pi<Scalar>() * domain.outer_radius;
}

/// Boundary least-squares misfit of a solved state against the measurement,
/// in the P1 mass of the outer boundary polygon.
template <typename Scalar>
Scalar boundary_misfit(const FemSystem<Scalar>& system, const NodalField<Scalar>& u,
                       const BoundaryField<Scalar>& g_D) {
  const VectorX<Scalar> res =
      system.outer_trace_values(u) - system.sample_at_mesh_angles(g_D);
  return Scalar(0.5) * system.inner_product_outer(res, res);
}

/// Penalized objective L_eta(shape) = misfit + eta * perimeter.
template <typename Scalar>
ObjectiveValue<Scalar> evaluate(const RadialShape<Scalar>& shape, const HoldAll<Scalar>& domain,
                                const CauchyData<Scalar>& data, Scalar eta,
                                const MeshParams<Scalar>& params = {}) {
  detail::require(eta >= Scalar(0), "evaluate: eta must be nonnegative");
  const AnnularMesh<Scalar> mesh =
      build_mesh(shape, domain, params.n_radial, params.n_angular, params.grading, params.phase);
  const FemSystem<Scalar> system(mesh);
  const NodalField<Scalar> u = system.solve(data.g_N);
  ObjectiveValue<Scalar> value;
  value.misfit = boundary_misfit(system, u, data.g_D);
  value.perimeter = relative_perimeter(shape, domain);
  value.eta = eta;
  value.total = value.misfit + eta * value.perimeter;
  return value;
}

/// Outer trace produced by a given obstacle, resampled onto a data grid.
/// Building data with the same mesh parameters as the reconstruction commits
/// an inverse crime; synthesize_data avoids that with a finer, phase-shifted
/// solve.
template <typename Scalar>
BoundaryField<Scalar> forward_trace(const RadialShape<Scalar>& shape,
                                    const HoldAll<Scalar>& domain,
                                    const BoundaryField<Scalar>& g_N,
                                    const MeshParams<Scalar>& params, Index n_data,
                                    Scalar data_phase = Scalar(0)) {
  const AnnularMesh<Scalar> mesh =
      build_mesh(shape, domain, params.n_radial, params.n_angular, params.grading, params.phase);
  const FemSystem<Scalar> system(mesh);
  const NodalField<Scalar> u = system.solve(g_N);
  return outer_trace(u).resampled(n_data, data_phase);
}

namespace detail {

// Deterministic uniform samples in [-1, 1); the raw mt19937_64 stream is
// standardized, so outputs are identical across platforms.
template <typename Scalar>
VectorX<Scalar> uniform_noise(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  VectorX<Scalar> v(n);
  for (Index j = 0; j < n; ++j)
    v[j] = Scalar(2) * Scalar(double(rng() >> 11) * 0x1.0p-53) - Scalar(1);
  return v;
}

}  // namespace detail

/// Synthetic Cauchy data from a known obstacle: the measurement is the outer
/// trace of a solve on a fine_factor-times finer mesh with a half-cell angular
/// offset, plus uniform per-sample noise calibrated so that
/// ||noise||_L2 = noise_level * ||g_D||_L2. Deterministic in the seed.
template <typename Scalar>
CauchyData<Scalar> synthesize_data(const RadialShape<Scalar>& true_shape,
                                   const HoldAll<Scalar>& domain,
                                   const BoundaryField<Scalar>& g_N, Scalar noise_level,
                                   std::uint64_t seed, Index fine_factor,
                                   const MeshParams<Scalar>& base_params = {},
                                   Index n_data = kDefaultThetaSamples) {
  detail::require(fine_factor >= 2, "synthesize_data: fine_factor must be >= 2");
  detail::require(noise_level >= Scalar(0), "synthesize_data: noise_level must be >= 0");
  MeshParams<Scalar> fine = base_params.refined(fine_factor);
  fine.phase = half_cell_phase<Scalar>(fine.n_angular);

  BoundaryField<Scalar> g_D = forward_trace(true_shape, domain, g_N, fine, n_data);

  if (noise_level > Scalar(0)) {
    VectorX<Scalar> noise = detail::uniform_noise<Scalar>(n_data, seed);
    const Scalar clean_norm = g_D.values().norm();
    detail::require(clean_norm > Scalar(0), "synthesize_data: cannot scale noise on zero data");
    noise *= noise_level * clean_norm / noise.norm();
    g_D = BoundaryField<Scalar>(g_D.values() + noise, g_D.phase());
  }

  CauchyData<Scalar> data;
  data.g_N = g_N.size() == n_data ? g_N : g_N.resampled(n_data);
  data.g_D = std::move(g_D);
  data.noise_level = noise_level;
  data.seed = seed;
  data.fine_factor = fine_factor;
  data.validate();
  return data;
}

}  // namespace shapeinv
