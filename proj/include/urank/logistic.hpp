#pragma once

// Stable logistic primitives shared by the loss functions and the
// bound verifier.
//
// Pairwise terms use the base-2 logistic loss log2(1 + e^{-sigma x}).
// Base 2 matters: it makes the loss an upper bound of the 0/1 indicator
// (value exactly 1 at x = 0), which the bound chain in the verifier
// depends on. A natural-log version is strictly below 1 near the origin
// and the verified inequalities would fail.

#include <cmath>

namespace urank {

inline constexpr double kInvLn2 = 1.4426950408889634074;  // 1/ln 2

inline double sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// ln(1 + e^x) without overflow for large |x|.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// log2(1 + e^{-x}); the pairwise logistic loss of a score margin x.
inline double log2_logistic(double x) { return softplus(-x) * kInvLn2; }

// d/dx log2(1 + e^{-x}) = -sigmoid(-x) / ln 2.
inline double log2_logistic_deriv(double x) { return -sigmoid(-x) * kInvLn2; }

}  // namespace urank
