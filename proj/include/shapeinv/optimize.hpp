#pragma once

#include "shapeinv/functionals.hpp"
#include "shapeinv/geometry.hpp"
#include "shapeinv/shape_calculus.hpp"
#include "shapeinv/types.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace shapeinv {

template <typename Scalar>
struct OptimizerConfig {
  Scalar eta = Scalar(0);
  std::optional<Scalar> epsilon_cone;
  Index max_iters = 300;
  Scalar armijo_slope = Scalar(1e-4);
  Scalar backtrack_ratio = Scalar(0.5);
  Scalar initial_step = Scalar(1);
  Scalar grad_tolerance = Scalar(1e-8);
  Index k_active = kDefaultMaxMode;
  bool mode_schedule = false;  // grow the active band from 2 modes upward
  Scalar step_min = Scalar(1e-12);
  Scalar min_mesh_angle_deg = Scalar(5);

  void validate() const {
    detail::require(eta >= Scalar(0), "OptimizerConfig: eta must be >= 0");
    detail::require(armijo_slope > Scalar(0) && armijo_slope < Scalar(1),
                    "OptimizerConfig: armijo_slope must lie in (0,1)");
    detail::require(backtrack_ratio > Scalar(0) && backtrack_ratio < Scalar(1),
                    "OptimizerConfig: backtrack_ratio must lie in (0,1)");
    detail::require(initial_step > Scalar(0) && grad_tolerance > Scalar(0) &&
                        step_min > Scalar(0),
                    "OptimizerConfig: steps and tolerances must be positive");
    detail::require(max_iters >= 1 && k_active >= 0, "OptimizerConfig: bad counts");
    if (epsilon_cone)
      detail::require(*epsilon_cone > Scalar(0), "OptimizerConfig: epsilon_cone must be > 0");
  }
};

enum class StopReason { gradient_tolerance, step_collapse, max_iterations };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::gradient_tolerance: return "gradient_tolerance";
    case StopReason::step_collapse: return "step_collapse";
    case StopReason::max_iterations: return "max_iterations";
  }
  return "unknown";
}

template <typename Scalar>
struct IterationRecord {
  Index iteration = 0;
  VectorX<Scalar> coefficients;
  ObjectiveValue<Scalar> objective;
  Scalar gradient_norm = Scalar(0);
  Scalar step = Scalar(0);  // step that produced this iterate (0 for the initial one)
  AdmissibilityFlags flags;
  std::optional<Scalar> hausdorff_to_reference;
};

template <typename Scalar>
struct OptimizationTrace {
  std::vector<IterationRecord<Scalar>> iterations;
  RadialShape<Scalar> final_shape;
  StopReason stop_reason = StopReason::max_iterations;
  Index evaluation_count = 0;  // PDE-evaluating objective calls
};

/// Pull a shape back into the admissible set by uniformly shrinking its
/// oscillatory modes until the radial bounds (and, when requested, the
/// epsilon-cone sampler) hold. Admissible shapes are returned unchanged.
template <typename Scalar>
RadialShape<Scalar> project_admissible(const RadialShape<Scalar>& shape,
                                       const HoldAll<Scalar>& domain,
                                       std::optional<Scalar> epsilon_cone = std::nullopt,
                                       Scalar margin = Scalar(1e-3)) {
  domain.validate();
  const Scalar lo = domain.min_radius + margin;
  const Scalar hi = domain.safety_radius - margin;

  auto admissible = [&](const RadialShape<Scalar>& s) {
    if (!(min_radius_of(s) >= lo && max_radius_of(s) <= hi)) return false;
    return !epsilon_cone || check_epsilon_cone(s, *epsilon_cone).passed;
  };
  if (admissible(shape)) return shape;

  detail::require(shape.r0 >= lo && shape.r0 <= hi,
                  "project_admissible: infeasible even as a circle");
  auto scaled = [&](Scalar s) {
    RadialShape<Scalar> out = shape;
    out.cos_coeffs *= s;
    out.sin_coeffs *= s;
    return out;
  };
  if (!admissible(scaled(Scalar(0))))
    throw std::invalid_argument("project_admissible: infeasible even as a circle");

  Scalar good = Scalar(0), bad = Scalar(1);
  for (int it = 0; it < 50; ++it) {
    const Scalar mid = (good + bad) / Scalar(2);
    (admissible(scaled(mid)) ? good : bad) = mid;
  }
  return scaled(good);
}

/// Steepest descent on the radial Fourier coefficients with Armijo
/// backtracking. Candidate steps that leave the admissible set (radius bounds,
/// mesh quality, optional epsilon-cone) are rejected inside the line search;
/// when the cone constraint is active and backtracking stalls, one projected
/// candidate is tried before giving up. Deterministic.
template <typename Scalar>
OptimizationTrace<Scalar> minimize(const RadialShape<Scalar>& initial,
                                   const HoldAll<Scalar>& domain, const CauchyData<Scalar>& data,
                                   const OptimizerConfig<Scalar>& config,
                                   const MeshParams<Scalar>& params = {},
                                   const std::optional<RadialShape<Scalar>>& reference =
                                       std::nullopt) {
  config.validate();
  domain.validate();
  const Index k_max = initial.max_mode();

  OptimizationTrace<Scalar> trace;
  RadialShape<Scalar> shape = initial;
  {
    const AdmissibilityFlags flags0 =
        check_admissible(shape, domain, kDefaultThetaSamples, config.epsilon_cone);
    detail::require(flags0.all(), "minimize: initial shape is not admissible");
  }

  auto active_modes = [&](Index iter) {
    if (!config.mode_schedule) return std::min(config.k_active, k_max);
    return std::min(std::min(config.k_active, k_max), Index(2) + iter / 25);
  };
  auto masked = [&](VectorX<Scalar> g, Index k_active) {
    for (Index k = k_active + 1; k <= k_max; ++k) {
      g[k] = Scalar(0);
      g[k_max + k] = Scalar(0);
    }
    return g;
  };
  auto mesh_ok = [&](const RadialShape<Scalar>& s) {
    const auto mesh = build_mesh(s, domain, params.n_radial, params.n_angular, params.grading,
                                 params.phase);
    return mesh_quality(mesh).min_angle_deg >= config.min_mesh_angle_deg;
  };

  GradientEvaluation<Scalar> eval =
      objective_and_gradient(shape, domain, data, config.eta, params);
  trace.evaluation_count += 2;
  Scalar warm_step = config.initial_step;
  Scalar producing_step = Scalar(0);

  for (Index iter = 0; iter <= config.max_iters; ++iter) {
    const VectorX<Scalar> g = masked(eval.report.coeff_gradient, active_modes(iter));
    const Scalar gnorm = g.norm();

    IterationRecord<Scalar> rec;
    rec.iteration = iter;
    rec.coefficients = to_coefficients(shape);
    rec.objective = eval.objective;
    rec.gradient_norm = gnorm;
    rec.step = producing_step;
    rec.flags = check_admissible(shape, domain, kDefaultThetaSamples, config.epsilon_cone);
    if (reference) rec.hausdorff_to_reference = hausdorff_distance(shape, *reference);
    trace.iterations.push_back(std::move(rec));

    if (gnorm <= config.grad_tolerance) {
      trace.stop_reason = StopReason::gradient_tolerance;
      break;
    }
    if (iter == config.max_iters) {
      trace.stop_reason = StopReason::max_iterations;
      break;
    }

    const VectorX<Scalar> c0 = to_coefficients(shape);
    const Scalar required_slope = config.armijo_slope * gnorm * gnorm;
    Scalar step = std::min(config.initial_step, Scalar(2) * warm_step);
    bool accepted = false;
    bool cone_rejected = false;

    while (step > config.step_min) {
      const RadialShape<Scalar> candidate = shape_with_coefficients(shape, (c0 - step * g).eval());
      const AdmissibilityFlags flags =
          check_admissible(candidate, domain, kDefaultThetaSamples, config.epsilon_cone);
      if (!flags.all() || !mesh_ok(candidate)) {
        cone_rejected = cone_rejected || !flags.cone_ok;
        step *= config.backtrack_ratio;
        continue;
      }
      const ObjectiveValue<Scalar> cand_obj =
          evaluate(candidate, domain, data, config.eta, params);
      ++trace.evaluation_count;
      if (cand_obj.total <= eval.objective.total - required_slope * step) {
        shape = candidate;
        eval = objective_and_gradient(shape, domain, data, config.eta, params);
        trace.evaluation_count += 2;
        warm_step = step;
        producing_step = step;
        accepted = true;
        break;
      }
      step *= config.backtrack_ratio;
    }

    if (!accepted && cone_rejected && config.epsilon_cone) {
      // Projection fallback: shrink the full step back into the cone class.
      try {
        const RadialShape<Scalar> projected = project_admissible(
            shape_with_coefficients(shape, (c0 - config.initial_step * g).eval()), domain,
            config.epsilon_cone);
        if (mesh_ok(projected)) {
          const ObjectiveValue<Scalar> proj_obj =
              evaluate(projected, domain, data, config.eta, params);
          ++trace.evaluation_count;
          if (proj_obj.total < eval.objective.total) {
            shape = projected;
            eval = objective_and_gradient(shape, domain, data, config.eta, params);
            trace.evaluation_count += 2;
            producing_step = config.initial_step;
            accepted = true;
          }
        }
      } catch (const std::invalid_argument&) {
        // fall through to step collapse
      }
    }

    if (!accepted) {
      trace.stop_reason = StopReason::step_collapse;
      break;
    }
  }

  trace.final_shape = shape;
  return trace;
}

/// Terminal high-frequency coefficient energy sum_{k >= k_from} (a_k^2 + b_k^2).
template <typename Scalar>
Scalar high_mode_energy(const RadialShape<Scalar>& shape, Index k_from) {
  Scalar acc = Scalar(0);
  for (Index k = k_from; k <= shape.max_mode(); ++k)
    acc += shape.cos_coeffs[k - 1] * shape.cos_coeffs[k - 1] +
           shape.sin_coeffs[k - 1] * shape.sin_coeffs[k - 1];
  return acc;
}

}  // namespace shapeinv
