#pragma once

#include <algorithm>
#include <cmath>

namespace msnn {

/// Logistic with the exponent argument clamped to +-500. Shared by the tape
/// primitive and the vectorised layer step so both paths round identically.
inline double logistic_fn(double z) {
  z = std::clamp(z, -500.0, 500.0);
  return 1.0 / (1.0 + std::exp(-z));
}

}  // namespace msnn
