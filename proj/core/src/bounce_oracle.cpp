#include "neto/bounce_oracle.hpp"

#include <cmath>

namespace neto {
namespace {

constexpr double kHitTol = 1e-7;
constexpr double kProbeStep = 1e-4;
constexpr double kEscapeBound = 2.0;
constexpr int kEvalBudget = 200000;

struct MarchState {
  Vec3 origin;
  Vec3 dir;
  double sign;  // +1 marching through air (g > 0), -1 through the solid
};

/// Advances to the next surface crossing. Returns the crossing parameter or
/// a negative value when the ray escapes the bounding region first. Exact
/// SDF steps are safe at any scale; once the distance falls under one probe
/// step the march switches to fixed probes and bisects the first sign flip,
/// which also rides out tangential grazes where the plain march would stall.
double march_to_crossing(const ShapeSpec& shape, const MarchState& st,
                         int& evals, bool& bailed) {
  auto g = [&](double t) {
    ++evals;
    return st.sign * analytic_sdf(shape, Vec3(st.origin + t * st.dir));
  };
  // Exit parameter of the escape box along this segment.
  double t_escape = std::numeric_limits<double>::max();
  for (int c = 0; c < 3; ++c) {
    if (std::abs(st.dir[c]) < 1e-15) continue;
    const double a = (-kEscapeBound - st.origin[c]) / st.dir[c];
    const double b = (kEscapeBound - st.origin[c]) / st.dir[c];
    t_escape = std::min(t_escape, std::max(a, b));
  }

  double t = 0.0;
  while (evals < kEvalBudget) {
    const double d = g(t);
    if (d <= kHitTol) {
      // Either a crossing within tolerance or the start of a graze; probe
      // forward at fixed steps until the sign flips or the surface recedes.
      double t_prev = t;
      double d_prev = d;
      while (evals < kEvalBudget) {
        const double t_next = t_prev + kProbeStep;
        const double d_next = g(t_next);
        if (d_next <= 0.0) {
          // Bracketed: bisect to the surface.
          double lo = t_prev, hi = t_next;
          for (int i = 0; i < 80 && evals < kEvalBudget; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (g(mid) > 0.0) lo = mid; else hi = mid;
          }
          return 0.5 * (lo + hi);
        }
        if (d_next > 10.0 * kProbeStep) {
          // Grazed past the surface without touching it; resume marching.
          t = t_next;
          break;
        }
        if (t_next > t_escape) return -1.0;
        t_prev = t_next;
        d_prev = d_next;
      }
      if (d_prev <= kHitTol && evals >= kEvalBudget) break;
      continue;
    }
    if (t > t_escape && d > 0.0) return -1.0;
    t += d;
  }
  bailed = true;
  return -1.0;
}

}  // namespace

BounceResult brute_force_bounce_count(const ShapeSpec& shape, const Ray& ray,
                                      const OpticalConstants& constants,
                                      int max_bounces) {
  BounceResult res;
  MarchState st{ray.origin, ray.dir.normalized(), +1.0};
  bool inside = false;
  int evals = 0;

  while (res.count < max_bounces) {
    const double t_cross = march_to_crossing(shape, st, evals, res.bailed);
    if (res.bailed) return res;
    if (t_cross < 0.0) break;  // escaped: the path is complete

    const Vec3 x = st.origin + t_cross * st.dir;
    Vec3 n = analytic_sdf_grad(shape, x).second.normalized();
    // Orient the normal against the incident direction.
    const Vec3 n_opp = st.dir.dot(n) < 0.0 ? n : Vec3(-n);
    if (std::abs(st.dir.dot(n_opp)) < 1e-12) {
      res.bailed = true;  // perfectly tangential contact
      return res;
    }
    const double eta = inside ? constants.n_inside / constants.n_outside
                              : constants.n_outside / constants.n_inside;
    const auto r = refract<double>(st.dir, n_opp, eta);
    if (r.tir) {
      res.tir = true;
      res.last_point = x;
      res.last_dir = st.dir;
      return res;
    }
    res.count += 1;
    res.crossings.push_back(x);
    inside = !inside;
    st.dir = r.dir.normalized();
    st.sign = inside ? -1.0 : +1.0;
    // Clear the surface before resuming. Near-critical exits leave almost
    // tangentially, so the offset doubles until the new medium's sign shows.
    double off = 1e-6;
    st.origin = x + off * st.dir;
    for (int k = 0; k < 12 && st.sign * analytic_sdf(shape, st.origin) <= kHitTol;
         ++k) {
      off *= 2.0;
      st.origin = x + off * st.dir;
    }
  }

  res.last_point = st.origin;
  res.last_dir = st.dir;
  return res;
}

}  // namespace neto
