#pragma once

#include <cmath>

namespace fakeidet {

// Logistic function, evaluated on the side that cannot overflow.
inline double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Binary cross-entropy on a logit: max(z,0) - z*y + log(1 + e^-|z|).
// Label convention: bona fide 0, attack 1.
inline double bce_loss(double logit, double label) noexcept {
  return std::fmax(logit, 0.0) - logit * label + std::log1p(std::exp(-std::fabs(logit)));
}

// d bce / d logit.
inline double bce_dlogit(double logit, double label) noexcept { return sigmoid(logit) - label; }

}  // namespace fakeidet
