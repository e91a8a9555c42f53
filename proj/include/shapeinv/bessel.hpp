#pragma once

#include "shapeinv/types.hpp"

#include <cmath>
#include <limits>

namespace shapeinv {

// Modified Bessel functions by their ascending series, accurate for the
// moderate arguments (x of order one) arising on annular benchmark domains.

template <typename Scalar>
Scalar bessel_i0(Scalar x) {
  const Scalar q = x * x / Scalar(4);
  Scalar term = Scalar(1), sum = Scalar(1);
  for (int k = 1; k < 200; ++k) {
    term *= q / Scalar(k * k);
    sum += term;
    if (term < std::numeric_limits<Scalar>::epsilon() * sum) break;
  }
  return sum;
}

template <typename Scalar>
Scalar bessel_i1(Scalar x) {
  const Scalar q = x * x / Scalar(4);
  Scalar term = Scalar(1), sum = Scalar(1);
  for (int k = 1; k < 200; ++k) {
    term *= q / Scalar(k * (k + 1));
    sum += term;
    if (term < std::numeric_limits<Scalar>::epsilon() * sum) break;
  }
  return x / Scalar(2) * sum;
}

template <typename Scalar>
Scalar bessel_k0(Scalar x) {
  detail::require(x > Scalar(0), "bessel_k0: argument must be positive");
  const Scalar euler_gamma = Scalar(0.57721566490153286060651209008240243L);
  const Scalar q = x * x / Scalar(4);
  Scalar term = Scalar(1), harmonic = Scalar(0), sum = Scalar(0);
  for (int k = 1; k < 200; ++k) {
    term *= q / Scalar(k * k);
    harmonic += Scalar(1) / Scalar(k);
    const Scalar add = term * harmonic;
    sum += add;
    if (add < std::numeric_limits<Scalar>::epsilon() * (std::abs(sum) + Scalar(1))) break;
  }
  return -(std::log(x / Scalar(2)) + euler_gamma) * bessel_i0(x) + sum;
}

template <typename Scalar>
Scalar bessel_k1(Scalar x) {
  detail::require(x > Scalar(0), "bessel_k1: argument must be positive");
  const Scalar euler_gamma = Scalar(0.57721566490153286060651209008240243L);
  const Scalar q = x * x / Scalar(4);
  // sum_k [psi(k+1) + psi(k+2)] q^k / (k! (k+1)!), psi(n+1) = -gamma + H_n.
  Scalar coeff = Scalar(1);  // q^k / (k! (k+1)!)
  Scalar h_k = Scalar(0), h_k1 = Scalar(1);
  Scalar sum = coeff * (-Scalar(2) * euler_gamma + h_k + h_k1);
  for (int k = 1; k < 200; ++k) {
    coeff *= q / Scalar(k * (k + 1));
    h_k += Scalar(1) / Scalar(k);
    h_k1 += Scalar(1) / Scalar(k + 1);
    const Scalar add = coeff * (-Scalar(2) * euler_gamma + h_k + h_k1);
    sum += add;
    if (std::abs(add) < std::numeric_limits<Scalar>::epsilon() * (std::abs(sum) + Scalar(1)))
      break;
  }
  return Scalar(1) / x + std::log(x / Scalar(2)) * bessel_i1(x) - x / Scalar(4) * sum;
}

/// Radial solution u(rho) = A I0(rho) + B K0(rho) of -u'' - u'/rho + u = 0 with
/// u(inner_radius) = 0 and u'(outer_radius) = neumann_value.
template <typename Scalar>
struct AnnulusRadialSolution {
  Scalar coeff_i0 = Scalar(0);
  Scalar coeff_k0 = Scalar(0);

  Scalar value(Scalar rho) const {
    return coeff_i0 * bessel_i0(rho) + coeff_k0 * bessel_k0(rho);
  }
  Scalar radial_derivative(Scalar rho) const {
    return coeff_i0 * bessel_i1(rho) - coeff_k0 * bessel_k1(rho);
  }
};

template <typename Scalar>
AnnulusRadialSolution<Scalar> solve_annulus_radial(Scalar inner_radius, Scalar outer_radius,
                                                   Scalar neumann_value) {
  // I0(R0) A + K0(R0) B = 0,  I1(R1) A - K1(R1) B = g.
  const Scalar i0 = bessel_i0(inner_radius), k0 = bessel_k0(inner_radius);
  const Scalar i1 = bessel_i1(outer_radius), k1 = bessel_k1(outer_radius);
  const Scalar det = -i0 * k1 - k0 * i1;
  detail::require(std::abs(det) > Scalar(0), "solve_annulus_radial: singular system");
  AnnulusRadialSolution<Scalar> sol;
  sol.coeff_i0 = -k0 * neumann_value / det;
  sol.coeff_k0 = i0 * neumann_value / det;
  return sol;
}

}  // namespace shapeinv
