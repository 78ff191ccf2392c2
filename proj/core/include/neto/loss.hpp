#pragma once

#include <algorithm>
#include <cmath>

#include "neto/types.hpp"

namespace neto {

/// Weights of the three loss terms.
struct LossWeights {
  double refraction = 1e-4;
  double eikonal = 0.1;
  double mask = 0.1;
};

constexpr double kOpacityEps = 1e-4;

template <typename T>
T clamp_opacity(T o) {
  return std::min(std::max(o, T(kOpacityEps)), T(1) - T(kOpacityEps));
}

/// Binary cross entropy against a {0,1} mask; `o` must already be clamped.
template <typename T>
T bce(int mask, T o) {
  return mask ? -std::log(o) : -std::log(T(1) - o);
}

/// d bce / d o for a clamped opacity; zero when the clamp was active.
template <typename T>
T bce_grad(int mask, T o_raw) {
  if (o_raw <= T(kOpacityEps) || o_raw >= T(1) - T(kOpacityEps)) return T(0);
  return mask ? -T(1) / o_raw : T(1) / (T(1) - o_raw);
}

}  // namespace neto
