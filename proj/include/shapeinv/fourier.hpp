#pragma once

#include "shapeinv/types.hpp"

#include <cmath>

namespace shapeinv {

/// Real trigonometric polynomial a0 + sum_k (a[k-1] cos k.phi + b[k-1] sin k.phi)
/// in the local angle phi = theta - phase of the grid it was analyzed on.
/// For an even sample count N the series runs to k = N/2; the Nyquist sine
/// coefficient is identically zero on the grid and stored as zero.
template <typename Scalar>
struct TrigSeries {
  Scalar a0 = Scalar(0);
  VectorX<Scalar> a;  // cosine coefficients, k = 1..K
  VectorX<Scalar> b;  // sine coefficients, k = 1..K

  Index max_mode() const { return a.size(); }
};

/// Discrete Fourier analysis of N uniform samples v_j = p(phase + 2*pi*j/N).
/// Exact (to roundoff) for trig polynomials of degree <= N/2: analyze and
/// synthesize round-trip the samples.
template <typename Scalar>
TrigSeries<Scalar> trig_analyze(const VectorX<Scalar>& values) {
  const Index n = values.size();
  detail::require(n >= 4 && n % 2 == 0, "trig_analyze: need an even sample count >= 4");
  const Index k_max = n / 2;
  TrigSeries<Scalar> s;
  s.a.setZero(k_max);
  s.b.setZero(k_max);
  s.a0 = values.mean();
  const ArrayX<Scalar> phi =
      ArrayX<Scalar>::LinSpaced(n, Scalar(0), two_pi<Scalar>() * Scalar(n - 1) / Scalar(n));
  const ArrayX<Scalar> v = values.array();
  for (Index k = 1; k < k_max; ++k) {
    const ArrayX<Scalar> kphi = Scalar(k) * phi;
    s.a[k - 1] = Scalar(2) / Scalar(n) * (v * kphi.cos()).sum();
    s.b[k - 1] = Scalar(2) / Scalar(n) * (v * kphi.sin()).sum();
  }
  // Nyquist mode: cos(k_max*phi_j) alternates +-1, sine vanishes on the grid.
  Scalar nyq = Scalar(0);
  for (Index j = 0; j < n; ++j) nyq += (j % 2 == 0 ? values[j] : -values[j]);
  s.a[k_max - 1] = nyq / Scalar(n);
  s.b[k_max - 1] = Scalar(0);
  return s;
}

template <typename Scalar>
Scalar trig_eval(const TrigSeries<Scalar>& s, Scalar phi) {
  Scalar out = s.a0;
  for (Index k = 1; k <= s.max_mode(); ++k) {
    const Scalar kp = Scalar(k) * phi;
    out += s.a[k - 1] * std::cos(kp) + s.b[k - 1] * std::sin(kp);
  }
  return out;
}

template <typename Scalar>
Scalar trig_eval_derivative(const TrigSeries<Scalar>& s, Scalar phi) {
  Scalar out = Scalar(0);
  for (Index k = 1; k <= s.max_mode(); ++k) {
    const Scalar kp = Scalar(k) * phi;
    out += Scalar(k) * (-s.a[k - 1] * std::sin(kp) + s.b[k - 1] * std::cos(kp));
  }
  return out;
}

template <typename Scalar>
VectorX<Scalar> trig_synthesize(const TrigSeries<Scalar>& s, Index n) {
  VectorX<Scalar> out(n);
  for (Index j = 0; j < n; ++j)
    out[j] = trig_eval(s, two_pi<Scalar>() * Scalar(j) / Scalar(n));
  return out;
}

/// Coefficients of the derivative series (the Nyquist cosine mode of an even
/// grid carries no observable derivative on that grid and is dropped).
template <typename Scalar>
TrigSeries<Scalar> trig_differentiate(const TrigSeries<Scalar>& s) {
  TrigSeries<Scalar> d;
  const Index k_max = s.max_mode();
  d.a0 = Scalar(0);
  d.a.setZero(k_max);
  d.b.setZero(k_max);
  for (Index k = 1; k <= k_max; ++k) {
    d.a[k - 1] = Scalar(k) * s.b[k - 1];
    d.b[k - 1] = -Scalar(k) * s.a[k - 1];
  }
  d.a[k_max - 1] = Scalar(0);
  d.b[k_max - 1] = Scalar(0);
  return d;
}

}  // namespace shapeinv
