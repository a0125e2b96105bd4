#pragma once

#include <cmath>

#include "gbi/normal.hpp"

namespace gbi {

/// Beyond this |argument| the normal cdf is replaced by its 0/1 limit.
inline constexpr double kSaturation = 12.0;

template <typename Scalar>
Scalar saturated_cdf(Scalar x) {
  if (x > Scalar(kSaturation)) return Scalar(1);
  if (x < Scalar(-kSaturation)) return Scalar(0);
  return normal_cdf(x);
}

/// d_-(t; x, K) for a lognormal underlying with volatility `vol` and remaining time `remaining`.
template <typename Scalar>
Scalar d_minus(Scalar spot, Scalar strike, Scalar r, Scalar vol, Scalar remaining) {
  return (std::log(spot / strike) + (r - vol * vol / Scalar(2)) * remaining) / (vol * std::sqrt(remaining));
}

/// How the knock-out term of the risk-averse claim is carried to time t.
///
/// `published` uses the factor exp{a(a+1)(vol^2/2 - r)(T-t)}, the form the tabulated reference
/// results were produced with. `arbitrage_free` uses exp{a(a+1)vol^2/2 (T-t) - a r (T-t)}, the exact
/// risk-neutral expectation of the knock-out term; the two agree only when r = 0.
enum class CarryConvention { published, arbitrage_free };

template <typename Scalar>
Scalar knockout_carry(Scalar exponent, Scalar r, Scalar vol, Scalar remaining, CarryConvention convention) {
  const Scalar a = exponent;
  if (convention == CarryConvention::published) {
    return std::exp(a * (a + Scalar(1)) * (vol * vol / Scalar(2) - r) * remaining);
  }
  return std::exp(a * (a + Scalar(1)) * vol * vol / Scalar(2) * remaining - a * r * remaining);
}

/// Undiscounted price of the unit claim (1 - (L/X_T)^a) 1{X_T >= L}, remaining > 0.
/// The threshold enters as log L: for large p it lies far below the smallest double.
template <typename Scalar>
Scalar knockout_claim(Scalar spot, Scalar log_threshold, Scalar exponent, Scalar r, Scalar vol, Scalar remaining,
                      CarryConvention convention) {
  const Scalar log_moneyness = std::log(spot) - log_threshold;
  const Scalar d = (log_moneyness + (r - vol * vol / Scalar(2)) * remaining) / (vol * std::sqrt(remaining));
  const Scalar shifted = d - exponent * vol * std::sqrt(remaining);
  const Scalar ratio = std::exp(-exponent * log_moneyness);
  return saturated_cdf(d) - ratio * knockout_carry(exponent, r, vol, remaining, convention) * saturated_cdf(shifted);
}

/// Spot derivative of knockout_claim.
template <typename Scalar>
Scalar knockout_claim_delta(Scalar spot, Scalar log_threshold, Scalar exponent, Scalar r, Scalar vol,
                            Scalar remaining, CarryConvention convention) {
  const Scalar vol_sqrt = vol * std::sqrt(remaining);
  const Scalar log_moneyness = std::log(spot) - log_threshold;
  const Scalar d = (log_moneyness + (r - vol * vol / Scalar(2)) * remaining) / vol_sqrt;
  const Scalar shifted = d - exponent * vol_sqrt;
  const Scalar ratio = std::exp(-exponent * log_moneyness);
  const Scalar carry = knockout_carry(exponent, r, vol, remaining, convention);
  const Scalar pdf_d = std::abs(d) > Scalar(kSaturation) ? Scalar(0) : normal_pdf(d);
  const Scalar pdf_s = std::abs(shifted) > Scalar(kSaturation) ? Scalar(0) : normal_pdf(shifted);
  return pdf_d / (spot * vol_sqrt) - ratio * carry * pdf_s / (spot * vol_sqrt) +
         exponent * ratio / spot * carry * saturated_cdf(shifted);
}

}  // namespace gbi
