#pragma once

#include "shapeinv/fourier.hpp"
#include "shapeinv/types.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace shapeinv {

inline constexpr Index kDefaultThetaSamples = 256;
inline constexpr Index kDefaultMaxMode = 16;

/// Star-shaped obstacle boundary r(theta) = r0 + sum_k (a_k cos k.theta + b_k sin k.theta).
template <typename Scalar>
struct RadialShape {
  Scalar r0 = Scalar(0.5);
  VectorX<Scalar> cos_coeffs;  // a_k, k = 1..max_mode
  VectorX<Scalar> sin_coeffs;  // b_k, k = 1..max_mode
  Vector2<Scalar> center = Vector2<Scalar>::Zero();

  Index max_mode() const { return cos_coeffs.size(); }
};

/// Highest mode carrying a nonzero coefficient (0 for circles); the effective
/// band of the shape regardless of the declared array length.
template <typename Scalar>
Index effective_max_mode(const RadialShape<Scalar>& shape) {
  for (Index k = shape.max_mode(); k >= 1; --k)
    if (shape.cos_coeffs[k - 1] != Scalar(0) || shape.sin_coeffs[k - 1] != Scalar(0)) return k;
  return 0;
}

template <typename Scalar>
RadialShape<Scalar> make_circle(Scalar radius, Index max_mode = kDefaultMaxMode) {
  RadialShape<Scalar> s;
  s.r0 = radius;
  s.cos_coeffs.setZero(max_mode);
  s.sin_coeffs.setZero(max_mode);
  return s;
}

/// Hold-all geometry: obstacle must stay inside the safety disk of radius
/// safety_radius, which sits strictly inside the outer circle.
template <typename Scalar>
struct HoldAll {
  Scalar outer_radius = Scalar(1);
  Scalar safety_radius = Scalar(0.8);
  Scalar min_radius = Scalar(0.1);

  void validate() const {
    detail::require(Scalar(0) < min_radius && min_radius < safety_radius &&
                        safety_radius < outer_radius,
                    "HoldAll: need 0 < min_radius < safety_radius < outer_radius");
  }
};

template <typename Scalar>
Scalar radius_at(const RadialShape<Scalar>& shape, Scalar theta) {
  Scalar r = shape.r0;
  for (Index k = 1; k <= shape.max_mode(); ++k) {
    const Scalar kt = Scalar(k) * theta;
    r += shape.cos_coeffs[k - 1] * std::cos(kt) + shape.sin_coeffs[k - 1] * std::sin(kt);
  }
  return r;
}

template <typename Scalar>
Scalar radius_derivative(const RadialShape<Scalar>& shape, Scalar theta) {
  Scalar d = Scalar(0);
  for (Index k = 1; k <= shape.max_mode(); ++k) {
    const Scalar kt = Scalar(k) * theta;
    d += Scalar(k) *
         (-shape.cos_coeffs[k - 1] * std::sin(kt) + shape.sin_coeffs[k - 1] * std::cos(kt));
  }
  return d;
}

template <typename Scalar>
Scalar radius_second_derivative(const RadialShape<Scalar>& shape, Scalar theta) {
  Scalar d = Scalar(0);
  for (Index k = 1; k <= shape.max_mode(); ++k) {
    const Scalar kt = Scalar(k) * theta;
    d -= Scalar(k * k) *
         (shape.cos_coeffs[k - 1] * std::cos(kt) + shape.sin_coeffs[k - 1] * std::sin(kt));
  }
  return d;
}

template <typename Scalar>
Vector2<Scalar> boundary_point(const RadialShape<Scalar>& shape, Scalar theta) {
  const Scalar r = radius_at(shape, theta);
  return shape.center + r * Vector2<Scalar>(std::cos(theta), std::sin(theta));
}

/// Unit normal on the obstacle boundary pointing out of the obstacle (into the
/// annulus). Throws when the curve tangent degenerates.
template <typename Scalar>
Vector2<Scalar> outward_normal(const RadialShape<Scalar>& shape, Scalar theta) {
  const Scalar r = radius_at(shape, theta);
  const Scalar rp = radius_derivative(shape, theta);
  const Scalar c = std::cos(theta), s = std::sin(theta);
  // Tangent (rp*c - r*s, rp*s + r*c) rotated by -pi/2.
  Vector2<Scalar> nu(rp * s + r * c, r * s - rp * c);
  const Scalar len = nu.norm();
  if (!(len > Scalar(1e-14)))
    throw std::runtime_error("outward_normal: degenerate curve tangent");
  return nu / len;
}

/// Signed curvature of the polar curve, positive on convex obstacles for the
/// outward normal orientation.
template <typename Scalar>
Scalar curvature(const RadialShape<Scalar>& shape, Scalar theta) {
  const Scalar r = radius_at(shape, theta);
  const Scalar rp = radius_derivative(shape, theta);
  const Scalar rpp = radius_second_derivative(shape, theta);
  const Scalar g = r * r + rp * rp;
  return (g + rp * rp - r * rpp) / (g * std::sqrt(g));
}

/// cos of the angle between the radial direction and the outward normal;
/// converts radial perturbation amplitudes into normal ones.
template <typename Scalar>
Scalar radial_normal_factor(const RadialShape<Scalar>& shape, Scalar theta) {
  const Scalar r = radius_at(shape, theta);
  const Scalar rp = radius_derivative(shape, theta);
  return r / std::sqrt(r * r + rp * rp);
}

/// Arc length of the obstacle boundary by the periodic trapezoid rule;
/// spectrally accurate for band-limited radial functions.
template <typename Scalar>
Scalar perimeter(const RadialShape<Scalar>& shape, Index n_samples = kDefaultThetaSamples) {
  detail::require(n_samples >= 4, "perimeter: need at least 4 samples");
  Scalar acc = Scalar(0);
  for (Index j = 0; j < n_samples; ++j) {
    const Scalar theta = two_pi<Scalar>() * Scalar(j) / Scalar(n_samples);
    const Scalar r = radius_at(shape, theta);
    const Scalar rp = radius_derivative(shape, theta);
    acc += std::sqrt(r * r + rp * rp);
  }
  return acc * two_pi<Scalar>() / Scalar(n_samples);
}

template <typename Scalar>
Scalar min_radius_of(const RadialShape<Scalar>& shape, Index n_samples = kDefaultThetaSamples) {
  Scalar m = std::numeric_limits<Scalar>::max();
  for (Index j = 0; j < n_samples; ++j)
    m = std::min(m, radius_at(shape, two_pi<Scalar>() * Scalar(j) / Scalar(n_samples)));
  return m;
}

template <typename Scalar>
Scalar max_radius_of(const RadialShape<Scalar>& shape, Index n_samples = kDefaultThetaSamples) {
  Scalar m = std::numeric_limits<Scalar>::lowest();
  for (Index j = 0; j < n_samples; ++j)
    m = std::max(m, radius_at(shape, two_pi<Scalar>() * Scalar(j) / Scalar(n_samples)));
  return m;
}

/// Symmetric Hausdorff distance between the two sampled boundaries.
template <typename Scalar>
Scalar hausdorff_distance(const RadialShape<Scalar>& s1, const RadialShape<Scalar>& s2,
                          Index n_samples = 512) {
  detail::require(n_samples >= 64, "hausdorff_distance: need n_samples >= 64");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 2> p(n_samples, 2), q(n_samples, 2);
  for (Index j = 0; j < n_samples; ++j) {
    const Scalar theta = two_pi<Scalar>() * Scalar(j) / Scalar(n_samples);
    p.row(j) = boundary_point(s1, theta).transpose();
    q.row(j) = boundary_point(s2, theta).transpose();
  }
  auto directed = [&](const auto& from, const auto& to) {
    Scalar worst = Scalar(0);
    for (Index i = 0; i < from.rows(); ++i) {
      Scalar best = std::numeric_limits<Scalar>::max();
      for (Index j = 0; j < to.rows(); ++j) {
        const Scalar d2 = (from.row(i) - to.row(j)).squaredNorm();
        best = std::min(best, d2);
      }
      worst = std::max(worst, best);
    }
    return std::sqrt(worst);
  };
  return std::max(directed(p, q), directed(q, p));
}

/// Scalar field sampled on a uniform angular grid theta_j = phase + 2*pi*j/N,
/// with its trigonometric interpolant available for off-grid evaluation.
template <typename Scalar>
class BoundaryField {
 public:
  BoundaryField() = default;

  explicit BoundaryField(VectorX<Scalar> values, Scalar phase = Scalar(0))
      : values_(std::move(values)), phase_(phase) {
    detail::require(values_.size() >= 4 && values_.size() % 2 == 0,
                    "BoundaryField: need an even sample count >= 4");
    detail::require(values_.allFinite(), "BoundaryField: non-finite samples");
    series_ = trig_analyze(values_);
  }

  static BoundaryField constant(Scalar value, Index n, Scalar phase = Scalar(0)) {
    return BoundaryField(VectorX<Scalar>::Constant(n, value), phase);
  }

  static BoundaryField from_series(const TrigSeries<Scalar>& series, Index n,
                                   Scalar phase = Scalar(0)) {
    VectorX<Scalar> v(n);
    for (Index j = 0; j < n; ++j)
      v[j] = trig_eval(series, two_pi<Scalar>() * Scalar(j) / Scalar(n));
    return BoundaryField(std::move(v), phase);
  }

  /// Samples of cos(k.theta) (sine = false) or sin(k.theta) on the grid.
  static BoundaryField harmonic(Index k, bool sine, Index n, Scalar phase = Scalar(0)) {
    VectorX<Scalar> v(n);
    for (Index j = 0; j < n; ++j) {
      const Scalar theta = phase + two_pi<Scalar>() * Scalar(j) / Scalar(n);
      v[j] = sine ? std::sin(Scalar(k) * theta) : std::cos(Scalar(k) * theta);
    }
    return BoundaryField(std::move(v), phase);
  }

  Index size() const { return values_.size(); }
  Scalar phase() const { return phase_; }
  const VectorX<Scalar>& values() const { return values_; }
  const TrigSeries<Scalar>& series() const { return series_; }

  Scalar theta_at(Index j) const {
    return phase_ + two_pi<Scalar>() * Scalar(j) / Scalar(size());
  }

  /// Trigonometric interpolant; exact at the grid points.
  Scalar operator()(Scalar theta) const { return trig_eval(series_, theta - phase_); }

  Scalar derivative_at(Scalar theta) const {
    return trig_eval_derivative(series_, theta - phase_);
  }

  BoundaryField resampled(Index n, Scalar phase = Scalar(0)) const {
    VectorX<Scalar> v(n);
    for (Index j = 0; j < n; ++j)
      v[j] = (*this)(phase + two_pi<Scalar>() * Scalar(j) / Scalar(n));
    return BoundaryField(std::move(v), phase);
  }

 private:
  VectorX<Scalar> values_;
  Scalar phase_ = Scalar(0);
  TrigSeries<Scalar> series_;
};

template <typename Scalar>
BoundaryField<Scalar> sampled_on_grid(Index n, Scalar phase, auto&& fn) {
  VectorX<Scalar> v(n);
  for (Index j = 0; j < n; ++j)
    v[j] = fn(phase + two_pi<Scalar>() * Scalar(j) / Scalar(n));
  return BoundaryField<Scalar>(std::move(v), phase);
}

/// Sobolev norm of a boundary field in the angular Fourier basis, with the
/// curve metric frozen at the mean radius: exact on circles and spectrally
/// computable in general. Supported exponents: 0, 1/2, 1.
template <typename Scalar>
Scalar boundary_norm(const BoundaryField<Scalar>& h, const RadialShape<Scalar>& shape,
                     Scalar sobolev_exponent) {
  const bool supported = sobolev_exponent == Scalar(0) ||
                         sobolev_exponent == Scalar(0.5) || sobolev_exponent == Scalar(1);
  detail::require(supported, "boundary_norm: unsupported Sobolev exponent");
  const Scalar mean_radius = shape.r0;
  const auto& s = h.series();
  Scalar acc = Scalar(2) * Scalar(EIGEN_PI) * s.a0 * s.a0;
  for (Index k = 1; k <= s.max_mode(); ++k) {
    const Scalar weight = std::pow(Scalar(1) + Scalar(k) * Scalar(k), sobolev_exponent);
    acc += Scalar(EIGEN_PI) * weight *
           (s.a[k - 1] * s.a[k - 1] + s.b[k - 1] * s.b[k - 1]);
  }
  return std::sqrt(mean_radius * acc);
}

struct AdmissibilityFlags {
  bool above_min_radius = false;
  bool inside_safety_disk = false;
  bool cone_ok = true;  // only meaningful when an epsilon was supplied

  bool all() const { return above_min_radius && inside_safety_disk && cone_ok; }
};

/// Result of the epsilon-cone sampler. On failure holds the first violation:
/// the boundary angle whose cone family failed, the cone vertex, and a cone
/// point that landed strictly inside the obstacle.
template <typename Scalar>
struct EpsilonConeReport {
  bool passed = true;
  Scalar boundary_theta = Scalar(0);
  Vector2<Scalar> cone_vertex = Vector2<Scalar>::Zero();
  Vector2<Scalar> violating_point = Vector2<Scalar>::Zero();
};

namespace detail {

template <typename Scalar>
bool strictly_inside_obstacle(const RadialShape<Scalar>& shape, const Vector2<Scalar>& z,
                              Scalar tol) {
  const Vector2<Scalar> d = z - shape.center;
  const Scalar rz = d.norm();
  const Scalar theta = std::atan2(d.y(), d.x());
  return rz < radius_at(shape, theta) - tol;
}

// True when every sampled point of the cone C(y, xi, eps) avoids the open
// obstacle. Records the first offending point.
template <typename Scalar>
bool cone_clear(const RadialShape<Scalar>& shape, const Vector2<Scalar>& y,
                const Vector2<Scalar>& xi, Scalar eps, Index n_ray, Index n_len,
                Scalar tol, Vector2<Scalar>* offender) {
  const Vector2<Scalar> perp(-xi.y(), xi.x());
  for (Index p = 0; p < n_ray; ++p) {
    const Scalar phi = -eps + Scalar(2) * eps * Scalar(p) / Scalar(n_ray - 1);
    const Vector2<Scalar> dir = std::cos(phi) * xi + std::sin(phi) * perp;
    for (Index q = 0; q < n_len; ++q) {
      const Scalar t = eps * (Scalar(q) + Scalar(0.5)) / Scalar(n_len);
      const Vector2<Scalar> z = y + t * dir;
      if (strictly_inside_obstacle(shape, z, tol)) {
        if (offender) *offender = z;
        return false;
      }
    }
  }
  return true;
}

}  // namespace detail

/// Sampled necessary-condition test of the epsilon-cone property of the
/// obstacle complement. The candidate cone direction at a boundary point is
/// the outward normal (which points into the complement); a small fan of
/// nearby directions is scanned before declaring a failure.
template <typename Scalar>
EpsilonConeReport<Scalar> check_epsilon_cone(const RadialShape<Scalar>& shape, Scalar epsilon,
                                             Index n_boundary = 64, Index n_cone = 32) {
  detail::require(epsilon > Scalar(0), "check_epsilon_cone: epsilon must be positive");
  detail::require(n_boundary >= 16 && n_cone >= 16, "check_epsilon_cone: counts must be >= 16");

  const Scalar tol = Scalar(1e-12) * std::max(shape.r0, Scalar(1));
  const Index n_ray = 9;
  const Index n_len = std::max<Index>(2, n_cone / n_ray);
  const Index n_vr = std::max<Index>(2, n_cone / 8);
  const Index n_va = 8;

  EpsilonConeReport<Scalar> report;
  for (Index i = 0; i < n_boundary; ++i) {
    const Scalar theta = two_pi<Scalar>() * Scalar(i) / Scalar(n_boundary);
    const Vector2<Scalar> x = boundary_point(shape, theta);
    const Vector2<Scalar> nu = outward_normal(shape, theta);
    const Scalar nu_angle = std::atan2(nu.y(), nu.x());

    // Vertices: x itself plus a polar grid of B(x, eps) kept to the closed
    // complement of the obstacle.
    std::vector<Vector2<Scalar>> vertices;
    vertices.push_back(x);
    for (Index m = 1; m <= n_vr; ++m) {
      const Scalar rho = epsilon * Scalar(m) / Scalar(n_vr + 1);
      for (Index l = 0; l < n_va; ++l) {
        const Scalar alpha = two_pi<Scalar>() * Scalar(l) / Scalar(n_va);
        const Vector2<Scalar> y = x + rho * Vector2<Scalar>(std::cos(alpha), std::sin(alpha));
        if (!detail::strictly_inside_obstacle(shape, y, -tol)) vertices.push_back(y);
      }
    }

    const Scalar fan[5] = {Scalar(0), epsilon / 2, -epsilon / 2, epsilon, -epsilon};
    bool point_ok = false;
    Vector2<Scalar> first_vertex = x, first_offender = x;
    bool have_violation = false;
    for (const Scalar delta : fan) {
      const Vector2<Scalar> xi(std::cos(nu_angle + delta), std::sin(nu_angle + delta));
      bool all_clear = true;
      for (const auto& y : vertices) {
        Vector2<Scalar> offender;
        if (!detail::cone_clear(shape, y, xi, epsilon, n_ray, n_len, tol, &offender)) {
          all_clear = false;
          if (!have_violation) {
            have_violation = true;
            first_vertex = y;
            first_offender = offender;
          }
          break;
        }
      }
      if (all_clear) {
        point_ok = true;
        break;
      }
    }
    if (!point_ok) {
      report.passed = false;
      report.boundary_theta = theta;
      report.cone_vertex = first_vertex;
      report.violating_point = first_offender;
      return report;
    }
  }
  return report;
}

template <typename Scalar>
AdmissibilityFlags check_admissible(const RadialShape<Scalar>& shape, const HoldAll<Scalar>& domain,
                                    Index n_samples = kDefaultThetaSamples,
                                    std::optional<Scalar> epsilon_cone = std::nullopt) {
  AdmissibilityFlags flags;
  flags.above_min_radius = min_radius_of(shape, n_samples) > domain.min_radius;
  flags.inside_safety_disk = max_radius_of(shape, n_samples) < domain.safety_radius;
  if (epsilon_cone && flags.above_min_radius && flags.inside_safety_disk)
    flags.cone_ok = check_epsilon_cone(shape, *epsilon_cone).passed;
  return flags;
}

// Coefficient-vector view used by derivatives and the optimizer: ordering is
// [r0, a_1..a_K, b_1..b_K].

template <typename Scalar>
Index coefficient_count(const RadialShape<Scalar>& shape) {
  return 1 + 2 * shape.max_mode();
}

template <typename Scalar>
VectorX<Scalar> to_coefficients(const RadialShape<Scalar>& shape) {
  VectorX<Scalar> c(coefficient_count(shape));
  c[0] = shape.r0;
  c.segment(1, shape.max_mode()) = shape.cos_coeffs;
  c.segment(1 + shape.max_mode(), shape.max_mode()) = shape.sin_coeffs;
  return c;
}

template <typename Scalar>
RadialShape<Scalar> shape_with_coefficients(const RadialShape<Scalar>& like,
                                            const VectorX<Scalar>& c) {
  const Index k = like.max_mode();
  detail::require(c.size() == 1 + 2 * k, "shape_with_coefficients: wrong coefficient count");
  RadialShape<Scalar> out = like;
  out.r0 = c[0];
  out.cos_coeffs = c.segment(1, k);
  out.sin_coeffs = c.segment(1 + k, k);
  return out;
}

inline std::string coefficient_label(Index i, Index max_mode) {
  if (i == 0) return "r0";
  if (i <= max_mode) return "a" + std::to_string(i);
  return "b" + std::to_string(i - max_mode);
}

}  // namespace shapeinv
