#pragma once

#include <cmath>
#include <numbers>

#include "gbi/errors.hpp"

namespace gbi {

template <typename Scalar>
Scalar normal_pdf(Scalar x) {
  constexpr Scalar inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<Scalar> / std::numbers::sqrt2_v<Scalar>;
  return inv_sqrt_2pi * std::exp(Scalar(-0.5) * x * x);
}

template <typename Scalar>
Scalar normal_cdf(Scalar x) {
  return Scalar(0.5) * std::erfc(-x / std::numbers::sqrt2_v<Scalar>);
}

/// Inverse of normal_cdf on (0, 1). Rational initial guess followed by
/// Halley steps against erfc, which brings the result to full double precision.
template <typename Scalar>
Scalar normal_quantile(Scalar p) {
  if (!(p > Scalar(0) && p < Scalar(1))) {
    throw DomainError("normal_quantile: probability must lie in (0, 1)");
  }
  constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                          1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                          6.680131188771972e+01,  -1.328068155288572e+01};
  constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                          -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                          3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  const double pd = static_cast<double>(p);
  double x;
  if (pd < p_low) {
    const double q = std::sqrt(-2.0 * std::log(pd));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (pd <= 1.0 - p_low) {
    const double q = pd - 0.5;
    const double s = q * q;
    x = (((((a[0] * s + a[1]) * s + a[2]) * s + a[3]) * s + a[4]) * s + a[5]) * q /
        (((((b[0] * s + b[1]) * s + b[2]) * s + b[3]) * s + b[4]) * s + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-pd));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  Scalar y = static_cast<Scalar>(x);
  for (int i = 0; i < 2; ++i) {
    // Work on the smaller tail so the residual keeps its relative precision.
    const Scalar e = (y <= Scalar(0)) ? normal_cdf(y) - p : (Scalar(1) - p) - normal_cdf(-y);
    const Scalar u = e / normal_pdf(y);
    y -= u / (Scalar(1) + y * u / Scalar(2));
  }
  return y;
}

}  // namespace gbi
