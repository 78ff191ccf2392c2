#pragma once

#include <cmath>
#include <optional>

#include "neto/types.hpp"

namespace neto {

/// Refractive indices of the two media on either side of the object surface.
struct OpticalConstants {
  double n_outside = 1.0003;  ///< surrounding air
  double n_inside = 1.4723;   ///< solid glass
};

template <typename T>
struct RayT {
  Vec3T<T> origin;
  Vec3T<T> dir;  ///< unit length
};
using Ray = RayT<double>;

/// Result of a refraction query. When `tir` is set the incident ray is
/// totally reflected and `dir` is not meaningful.
template <typename T>
struct RefractResultT {
  Vec3T<T> dir = Vec3T<T>::Zero();
  bool tir = false;
};
using RefractResult = RefractResultT<double>;

/// Refracts `incident` (unit) at a surface with unit `normal`, where
/// eta = n_incident / n_transmitted. The normal must oppose the incident
/// direction: incident.dot(normal) < 0. Callers flip the normal at exit
/// interfaces before calling.
template <typename T>
RefractResultT<T> refract(const Vec3T<T>& incident, const Vec3T<T>& normal,
                          T eta) {
  const T cos_in = -incident.dot(normal);
  if (!(cos_in > T(0))) {
    throw DomainError("refract: incident ray does not oppose the normal");
  }
  const T k = T(1) - eta * eta * (T(1) - cos_in * cos_in);
  RefractResultT<T> out;
  if (k < T(0)) {
    out.tir = true;
    return out;
  }
  const T cos_out = std::sqrt(k);
  out.dir = eta * incident + (eta * cos_in - cos_out) * normal;
  return out;
}

/// Adjoint of refract() for hand-written differentiation. Given the upstream
/// gradient on the transmitted direction, accumulates gradients on the
/// incident direction and the normal. Valid only when refract() did not TIR.
template <typename T>
void refract_pullback(const Vec3T<T>& incident, const Vec3T<T>& normal, T eta,
                      const Vec3T<T>& d_out, Vec3T<T>& d_incident,
                      Vec3T<T>& d_normal) {
  const T cos_in = -incident.dot(normal);
  const T k = T(1) - eta * eta * (T(1) - cos_in * cos_in);
  const T cos_out = std::sqrt(k);
  // d(out)/d(cos_in) = (eta - eta^2 cos_in / cos_out) * normal
  const T dcoef = eta - eta * eta * cos_in / cos_out;
  const T g = d_out.dot(normal) * dcoef;
  d_incident += eta * d_out - g * normal;
  d_normal += (eta * cos_in - cos_out) * d_out - g * incident;
}

/// Infinite plane carrying a 2D frame, used as the pattern emitter. `u_axis`
/// and `v_axis` are orthonormal and lie in the plane. `extent` is the half
/// size of the active area in the uv frame (set by the capture simulator).
struct MonitorPlane {
  Vec3 origin = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 u_axis = Vec3::UnitX();
  Vec3 v_axis = Vec3::UnitY();
  Vec2 extent = Vec2::Zero();

  Vec2 to_uv(const Vec3& p) const {
    const Vec3 d = p - origin;
    return Vec2(d.dot(u_axis), d.dot(v_axis));
  }
  Vec3 from_uv(const Vec2& uv) const {
    return origin + uv.x() * u_axis + uv.y() * v_axis;
  }
  /// Euclidean scale used to express how large the active area is.
  double half_diagonal() const { return extent.norm(); }
};

/// Intersects a ray with the plane. Empty when the ray is parallel to the
/// plane or the hit lies behind the origin (t <= 0).
template <typename T>
std::optional<Vec3T<T>> intersect_plane(const Vec3T<T>& plane_origin,
                                        const Vec3T<T>& plane_normal,
                                        const RayT<T>& ray) {
  const T denom = ray.dir.dot(plane_normal);
  if (std::abs(denom) < T(1e-12)) return std::nullopt;
  const T t = (plane_origin - ray.origin).dot(plane_normal) / denom;
  if (t <= T(0)) return std::nullopt;
  return ray.origin + t * ray.dir;
}

inline std::optional<Vec3> intersect_plane(const MonitorPlane& plane,
                                           const Ray& ray) {
  return intersect_plane<double>(plane.origin, plane.normal, ray);
}

/// Pinhole camera. `rotation` columns are the camera axes expressed in world
/// coordinates (x right, y down, z toward the scene); `position` is the
/// optical center.
struct Camera {
  Mat3 rotation = Mat3::Identity();
  Vec3 position = Vec3::Zero();
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
};

/// Camera at `position` looking at `target` with +z_world as the up hint.
Camera look_at_camera(const Vec3& position, const Vec3& target, double fov_deg,
                      int width, int height);

/// World ray through continuous pixel coordinates (u, v); use (i + 0.5,
/// j + 0.5) for the center of pixel (i, j). Throws OutOfBoundsError when the
/// point lies off the sensor.
Ray pixel_ray(const Camera& cam, const Vec2& pixel);

/// Projects a world point to continuous pixel coordinates. Throws
/// DomainError for points at or behind the optical center plane.
Vec2 project(const Camera& cam, const Vec3& p);

/// Intersects a ray with the axis-aligned box [lo, hi]^3. Returns the
/// parameter interval clamped to t >= 0, or empty when the ray misses.
std::optional<std::pair<double, double>> intersect_box(const Ray& ray,
                                                       double lo, double hi);

}  // namespace neto
