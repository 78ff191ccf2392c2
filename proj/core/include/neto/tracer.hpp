#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "neto/field.hpp"
#include "neto/geometry.hpp"
#include "neto/sampling.hpp"
#include "neto/types.hpp"

namespace neto {

/// Surface located along a ray by volume rendering. `ts`/`gs` keep the full
/// sample plan (sorted parameters and field values, sign already flipped
/// when the caller asked for it) so the training pass can rebuild the weight
/// chain differentiably from the same positions.
template <typename T>
struct SurfaceHitT {
  T t_hat = T(0);
  Vec3T<T> point = Vec3T<T>::Zero();
  Vec3T<T> normal = Vec3T<T>::Zero();
  T opacity = T(0);
  VecXT<T> ts;
  VecXT<T> gs;
  VecXT<T> weights;
};

template <typename T>
struct VolumeHitT {
  bool surface = false;  ///< false mirrors the NoSurface outcome
  SurfaceHitT<T> hit;    ///< opacity and samples are valid either way
};

enum class PathStatus {
  ValidTwoBounce,
  Miss,
  TIRExit,
  SelfOccluded,
  LowOpacity,
};

inline const char* path_status_name(PathStatus s) {
  switch (s) {
    case PathStatus::ValidTwoBounce: return "ValidTwoBounce";
    case PathStatus::Miss: return "Miss";
    case PathStatus::TIRExit: return "TIRExit";
    case PathStatus::SelfOccluded: return "SelfOccluded";
    case PathStatus::LowOpacity: return "LowOpacity";
  }
  return "Unknown";
}

/// Simulated two-refraction path. `entry` is populated for every ray (its
/// opacity feeds the mask loss even on a miss); the later limbs are
/// meaningful only when reached: exit from status != Miss, dir_out and
/// q_virtual only when status == ValidTwoBounce.
template <typename T>
struct RefractionPathT {
  SurfaceHitT<T> entry;
  std::optional<SurfaceHitT<T>> exit;
  Vec3T<T> dir_interior = Vec3T<T>::Zero();
  std::optional<Vec3T<T>> dir_out;
  std::optional<Vec3T<T>> q_virtual;
  PathStatus status = PathStatus::Miss;
};

namespace detail {

/// Near/far from the config when set, otherwise from the scene bound box.
/// Far below near means the ray never enters the scene volume.
template <typename T>
std::pair<T, T> ray_bounds(const RayT<T>& ray, const SamplingConfigT<T>& cfg) {
  if (cfg.far > cfg.near) return {cfg.near, cfg.far};
  // Slab intersection with [-b, b]^3, clamped to the forward half-line.
  T t0 = T(0);
  T t1 = std::numeric_limits<T>::max();
  for (int c = 0; c < 3; ++c) {
    const T o = ray.origin[c];
    const T d = ray.dir[c];
    if (std::abs(d) < T(1e-12)) {
      if (o < -cfg.scene_bound || o > cfg.scene_bound) return {T(1), T(0)};
      continue;
    }
    T a = (-cfg.scene_bound - o) / d;
    T b = (cfg.scene_bound - o) / d;
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  if (t1 <= t0) return {T(1), T(0)};
  return {t0, t1};
}

template <typename T>
void eval_field_at(const FieldBatchT<T>& field, const RayT<T>& ray,
                   const std::vector<T>& ts, bool flip_sign, VecXT<T>& out) {
  MatXT<T> pts(3, static_cast<Eigen::Index>(ts.size()));
  for (std::size_t i = 0; i < ts.size(); ++i)
    pts.col(static_cast<Eigen::Index>(i)) = ray.origin + ts[i] * ray.dir;
  field.values(pts, out);
  if (flip_sign) out = -out;
}

}  // namespace detail

/// Locates the surface along `ray` by coarse sampling plus sharpening
/// importance rounds, then either the opacity-weighted expected depth
/// (volume mode) or a bisection-refined first sign change (surface mode).
/// `flip_sign` presents the negated field to the weighting so exit surfaces
/// look like outside-to-inside crossings. NoSurface (surface=false) when the
/// accumulated opacity stays below cfg.opacity_threshold, or in surface mode
/// when no sign change exists.
template <typename T>
VolumeHitT<T> volume_intersect(const FieldBatchT<T>& field, T s,
                               const RayT<T>& ray,
                               const SamplingConfigT<T>& cfg, bool flip_sign) {
  VolumeHitT<T> res;
  const auto [near, far] = detail::ray_bounds(ray, cfg);
  if (!(far > near)) return res;

  std::vector<T> ts;
  coarse_samples(near, far, cfg.n_coarse, ts);
  VecXT<T> gs;
  detail::eval_field_at(field, ray, ts, flip_sign, gs);

  std::vector<T> fresh;
  VecXT<T> fresh_g;
  for (int round = 0; round < cfg.n_importance_rounds; ++round) {
    const T s_round = s * T(1 << round);
    importance_resample<T>(ts, gs, s_round, cfg.n_importance_per_round, fresh);
    detail::eval_field_at(field, ray, fresh, flip_sign, fresh_g);
    // Merge keeping both lists sorted.
    std::vector<T> mt(ts.size() + fresh.size());
    VecXT<T> mg(mt.size());
    std::vector<std::size_t> order(fresh.size());
    for (std::size_t i = 0; i < fresh.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return fresh[a] < fresh[b]; });
    std::size_t i = 0, j = 0, k = 0;
    while (i < ts.size() || j < fresh.size()) {
      const bool take_old =
          j >= fresh.size() || (i < ts.size() && ts[i] <= fresh[order[j]]);
      if (take_old) {
        mt[k] = ts[i];
        mg[static_cast<Eigen::Index>(k)] = gs[static_cast<Eigen::Index>(i)];
        ++i;
      } else {
        mt[k] = fresh[order[j]];
        mg[static_cast<Eigen::Index>(k)] =
            fresh_g[static_cast<Eigen::Index>(order[j])];
        ++j;
      }
      ++k;
    }
    ts = std::move(mt);
    gs = std::move(mg);
  }

  SurfaceHitT<T>& hit = res.hit;
  hit.ts = Eigen::Map<const VecXT<T>>(ts.data(), static_cast<Eigen::Index>(ts.size()));
  hit.gs = gs;

  if (cfg.mode == IntersectMode::kSurface) {
    // First interval with a sign change, refined by bisection on the field.
    Eigen::Index cross = -1;
    for (Eigen::Index i = 0; i + 1 < gs.size(); ++i) {
      if (gs[i] > T(0) && gs[i + 1] <= T(0)) {
        cross = i;
        break;
      }
    }
    if (cross < 0) return res;
    T lo = ts[static_cast<std::size_t>(cross)];
    T hi = ts[static_cast<std::size_t>(cross) + 1];
    VecXT<T> gm;
    for (int iter = 0; iter < 40; ++iter) {
      const T mid = (lo + hi) / T(2);
      detail::eval_field_at(field, ray, {mid}, flip_sign, gm);
      if (gm[0] > T(0)) lo = mid; else hi = mid;
    }
    hit.t_hat = (lo + hi) / T(2);
    hit.opacity = T(1);
  } else {
    VecXT<T> alpha;
    hit.opacity = section_weights(gs, s, alpha, hit.weights);
    if (hit.opacity < cfg.opacity_threshold) return res;
    T acc = T(0);
    for (Eigen::Index i = 0; i < hit.weights.size(); ++i)
      acc += hit.weights[i] * hit.ts[i];
    hit.t_hat = acc / std::max(hit.opacity, T(1e-9));
  }

  hit.point = ray.origin + hit.t_hat * ray.dir;
  MatXT<T> pt(3, 1), gr;
  pt.col(0) = hit.point;
  VecXT<T> val;
  field.value_grad(pt, val, gr);
  Vec3T<T> n = gr.col(0);
  if (flip_sign) n = -n;
  const T len = n.norm();
  hit.normal = len > T(1e-12) ? Vec3T<T>(n / len) : Vec3T<T>::UnitZ();
  res.surface = true;
  return res;
}

/// Simulates the two-refraction path camera -> entry -> exit -> monitor.
/// Self-occlusion is not decided here; callers run check_self_occlusion on
/// the returned entry/dir_interior and override the status.
template <typename T>
RefractionPathT<T> trace_two_bounce(const FieldBatchT<T>& field, T s,
                                    const RayT<T>& ray,
                                    const MonitorPlane& plane,
                                    const OpticalConstants& constants,
                                    const SamplingConfigT<T>& cfg) {
  RefractionPathT<T> path;
  VolumeHitT<T> entry = volume_intersect(field, s, ray, cfg, false);
  path.entry = std::move(entry.hit);
  if (!entry.surface) {
    path.status = PathStatus::Miss;
    return path;
  }

  // An unconverged field can render a normal that fails to oppose the ray;
  // such a hit carries no usable refraction and is excluded like a miss
  // (its opacity still feeds the mask loss).
  if (!(ray.dir.dot(path.entry.normal) < T(0))) {
    path.status = PathStatus::Miss;
    return path;
  }
  const T eta_in = T(constants.n_outside / constants.n_inside);
  const auto r1 = refract<T>(ray.dir, path.entry.normal, eta_in);
  if (r1.tir) {
    path.status = PathStatus::TIRExit;
    return path;
  }
  path.dir_interior = r1.dir.normalized();

  RayT<T> inner;
  inner.origin = path.entry.point + cfg.interior_step_offset * path.dir_interior;
  inner.dir = path.dir_interior;
  SamplingConfigT<T> inner_cfg = cfg;
  inner_cfg.near = T(0);
  inner_cfg.far = T(0);  // rederive bounds from the interior origin
  VolumeHitT<T> exit = volume_intersect(field, s, inner, inner_cfg, true);
  if (!exit.surface) {
    path.status = PathStatus::LowOpacity;
    path.exit = std::move(exit.hit);
    return path;
  }
  path.exit = std::move(exit.hit);

  const T eta_out = T(constants.n_inside / constants.n_outside);
  // The flipped-field normal reported by volume_intersect points back into
  // the solid, which is the orientation refract expects for an exit.
  const Vec3T<T> exit_normal_in = path.exit->normal;
  if (!(path.dir_interior.dot(exit_normal_in) < T(0))) {
    path.status = PathStatus::LowOpacity;
    return path;
  }
  const auto r2 = refract<T>(path.dir_interior, exit_normal_in, eta_out);
  if (r2.tir) {
    path.status = PathStatus::TIRExit;
    return path;
  }
  path.dir_out = r2.dir.normalized();

  RayT<T> out_ray;
  out_ray.origin = path.exit->point;
  out_ray.dir = *path.dir_out;
  const auto q = intersect_plane<T>(plane.origin.template cast<T>(),
                                    plane.normal.template cast<T>(), out_ray);
  if (!q) {
    path.status = PathStatus::LowOpacity;
    return path;
  }
  path.q_virtual = *q;
  path.status = PathStatus::ValidTwoBounce;
  return path;
}

/// Self-occlusion test: shoots the reversed refracted ray back toward the
/// entry point from a far stand-in for infinity and checks the segment
/// between the forward entry p_f and the reverse hit p_b for positive field
/// values, which indicate the chord leaves the solid and re-enters. NoSurface
/// on the reverse ray excludes the ray conservatively.
template <typename T>
bool check_self_occlusion(const FieldBatchT<T>& field, T s,
                          const SurfaceHitT<T>& entry,
                          const Vec3T<T>& dir_interior,
                          const SamplingConfigT<T>& cfg) {
  const T d_far = T(4) * T(std::sqrt(3.0)) * cfg.scene_bound;
  const Vec3T<T> p_f = entry.point;
  const Vec3T<T> v_p = p_f + d_far * dir_interior;

  RayT<T> rev;
  rev.origin = v_p;
  rev.dir = -dir_interior;
  SamplingConfigT<T> rev_cfg = cfg;
  rev_cfg.near = T(0);
  rev_cfg.far = T(0);
  VolumeHitT<T> back = volume_intersect(field, s, rev, rev_cfg, false);
  if (!back.surface) return true;

  const Vec3T<T> p_b = back.hit.point;
  const int n = cfg.n_segment_samples;
  MatXT<T> pts(3, n);
  for (int i = 0; i < n; ++i) {
    const T u = (T(i) + T(1)) / (T(n) + T(1));  // strictly inside (0, 1)
    pts.col(i) = p_f + u * (p_b - p_f);
  }
  VecXT<T> g;
  field.values(pts, g);
  for (int i = 0; i < n; ++i)
    if (g[i] > cfg.sdf_threshold) return true;
  return false;
}

/// Writes the debug dump consumed by the CLI trace command.
template <typename T>
void dump_path(std::ostream& os, const RefractionPathT<T>& path) {
  auto line3 = [&os](const char* tag, const Vec3T<T>& a) {
    os << tag << ' ' << a.x() << ' ' << a.y() << ' ' << a.z() << '\n';
  };
  if (path.status != PathStatus::Miss) {
    os << "ENTRY " << path.entry.point.x() << ' ' << path.entry.point.y()
       << ' ' << path.entry.point.z() << ' ' << path.entry.normal.x() << ' '
       << path.entry.normal.y() << ' ' << path.entry.normal.z() << '\n';
  }
  if (path.exit && path.status != PathStatus::Miss &&
      path.status != PathStatus::LowOpacity) {
    os << "EXIT " << path.exit->point.x() << ' ' << path.exit->point.y()
       << ' ' << path.exit->point.z() << ' ' << path.exit->normal.x() << ' '
       << path.exit->normal.y() << ' ' << path.exit->normal.z() << '\n';
  }
  if (path.q_virtual) line3("Q", *path.q_virtual);
  os << "STATUS " << path_status_name(path.status) << '\n';
}

}  // namespace neto
