#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "neto/types.hpp"

namespace neto {

/// How volume_intersect turns field samples into a surface location.
enum class IntersectMode {
  kVolume,   ///< opacity-weighted expected depth over section weights
  kSurface,  ///< first sign change refined by bisection
};

/// Per-ray sampling schedule. `near`/`far` are ray-parameter bounds; callers
/// either fill them from a scene-bound intersection or leave far <= near to
/// let the tracer derive them from `scene_bound`.
template <typename T>
struct SamplingConfigT {
  int n_coarse = 64;
  int n_importance_rounds = 4;
  int n_importance_per_round = 16;
  T near = T(0);
  T far = T(0);
  T interior_step_offset = T(5e-3);
  T opacity_threshold = T(0.5);
  T scene_bound = T(1);  ///< scene lives in [-scene_bound, scene_bound]^3
  IntersectMode mode = IntersectMode::kVolume;
  int n_segment_samples = 32;   ///< occlusion check: points on p_f -> p_b
  T sdf_threshold = T(1e-3);    ///< occlusion check: positivity cutoff
};
using SamplingConfig = SamplingConfigT<double>;

/// Logistic CDF with sharpness s, stable in both tails.
template <typename T>
T logistic_cdf(T x, T s) {
  const T a = s * x;
  if (a >= T(0)) return T(1) / (T(1) + std::exp(-a));
  const T e = std::exp(a);
  return e / (T(1) + e);
}

/// Section opacities and accumulated weights for K sorted samples with field
/// values g. Produces K-1 interval entries attached to the left endpoint:
///   alpha_i = clamp((Phi(g_i) - Phi(g_{i+1})) / Phi(g_i), 0, 1)
///   w_i     = alpha_i * prod_{j<i} (1 - alpha_j)
/// Returns the opacity O = sum_i w_i. The denominator is floored at 1e-9 so
/// fully saturated tails contribute zero rather than NaN.
template <typename T>
T section_weights(const VecXT<T>& g, T s, VecXT<T>& alpha, VecXT<T>& w) {
  const Eigen::Index k = g.size();
  alpha.resize(k > 0 ? k - 1 : 0);
  w.resize(alpha.size());
  T trans = T(1);
  T opacity = T(0);
  for (Eigen::Index i = 0; i + 1 < k; ++i) {
    const T phi_a = logistic_cdf(g[i], s);
    const T phi_b = logistic_cdf(g[i + 1], s);
    T a = (phi_a - phi_b) / std::max(phi_a, T(1e-9));
    a = std::min(std::max(a, T(0)), T(1));
    alpha[i] = a;
    w[i] = a * trans;
    opacity += w[i];
    trans *= T(1) - a;
  }
  return opacity;
}

/// Backward of section_weights. `wbar` is the upstream adjoint on w_i; any
/// adjoint on the opacity O = sum_i w_i must be folded into every wbar entry
/// by the caller. Accumulates d/dg into `gbar` and returns the sharpness
/// adjoint contribution. `alpha` must be the forward result for (g, s).
/// Intervals whose alpha clamp was active propagate nothing, matching the
/// piecewise-constant forward there.
template <typename T>
T section_weights_pullback(const VecXT<T>& g, T s, const VecXT<T>& alpha,
                           const VecXT<T>& wbar, VecXT<T>& gbar) {
  const Eigen::Index k = g.size();
  if (gbar.size() != k) {
    gbar.resize(k);
    gbar.setZero();
  }
  if (k < 2) return T(0);
  const Eigen::Index m = k - 1;

  VecXT<T> phi(k);
  for (Eigen::Index i = 0; i < k; ++i) phi[i] = logistic_cdf(g[i], s);
  VecXT<T> trans(m);
  T t = T(1);
  for (Eigen::Index i = 0; i < m; ++i) {
    trans[i] = t;
    t *= T(1) - alpha[i];
  }

  // Transmittance recursion T_{i+1} = T_i (1 - alpha_i) is reversed without
  // dividing by (1 - alpha_i), which may be zero.
  VecXT<T> phibar = VecXT<T>::Zero(k);
  T tbar = T(0);  // adjoint of T_{i+1} while visiting interval i
  T sbar = T(0);
  for (Eigen::Index i = m - 1; i >= 0; --i) {
    const T abar = wbar[i] * trans[i] - tbar * trans[i];
    tbar = wbar[i] * alpha[i] + tbar * (T(1) - alpha[i]);

    const T num = phi[i] - phi[i + 1];
    const T den = std::max(phi[i], T(1e-9));
    const T a_raw = num / den;
    if (a_raw <= T(0) || a_raw >= T(1)) continue;
    if (phi[i] > T(1e-9)) {
      phibar[i] += abar * phi[i + 1] / (den * den);
    } else {
      phibar[i] += abar / den;
    }
    phibar[i + 1] -= abar / den;
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    const T d = phi[i] * (T(1) - phi[i]);
    gbar[i] += phibar[i] * s * d;
    sbar += phibar[i] * g[i] * d;
  }
  return sbar;
}

/// Deterministic midpoint-stratified coarse samples over [near, far].
template <typename T>
void coarse_samples(T near, T far, int n, std::vector<T>& out) {
  out.resize(n);
  const T span = far - near;
  for (int i = 0; i < n; ++i)
    out[i] = near + span * (T(i) + T(0.5)) / T(n);
}

/// Draws `count` new sample positions from the inverse CDF of the interval
/// weights implied by (ts, gs) at sharpness s. Strata midpoints
/// u_k = (k + 0.5)/count make the draw deterministic. Falls back to uniform
/// placement when the weights carry no mass.
template <typename T>
void importance_resample(const std::vector<T>& ts, const VecXT<T>& gs, T s,
                         int count, std::vector<T>& out) {
  out.clear();
  out.reserve(count);
  const std::size_t k = ts.size();
  VecXT<T> alpha, w;
  VecXT<T> g = gs;
  const T total = section_weights(g, s, alpha, w);
  if (!(total > T(1e-12)) || k < 2) {
    const T lo = ts.front();
    const T hi = ts.back();
    for (int i = 0; i < count; ++i)
      out.push_back(lo + (hi - lo) * (T(i) + T(0.5)) / T(count));
    return;
  }
  std::vector<T> cdf(k - 1);
  T acc = T(0);
  for (std::size_t i = 0; i + 1 < k; ++i) {
    acc += w[static_cast<Eigen::Index>(i)] / total;
    cdf[i] = acc;
  }
  cdf.back() = T(1);
  for (int i = 0; i < count; ++i) {
    const T u = (T(i) + T(0.5)) / T(count);
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    const std::size_t idx =
        std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()),
                              k - 2);
    const T c_hi = cdf[idx];
    const T c_lo = idx == 0 ? T(0) : cdf[idx - 1];
    const T span = c_hi - c_lo;
    const T frac = span > T(1e-12) ? (u - c_lo) / span : T(0.5);
    out.push_back(ts[idx] + (ts[idx + 1] - ts[idx]) * frac);
  }
}

}  // namespace neto
