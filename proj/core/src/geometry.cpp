#include "neto/geometry.hpp"

#include <algorithm>

namespace neto {

Camera look_at_camera(const Vec3& position, const Vec3& target, double fov_deg,
                      int width, int height) {
  Camera cam;
  cam.position = position;
  cam.width = width;
  cam.height = height;

  const Vec3 z = (target - position).normalized();
  Vec3 up = Vec3::UnitZ();
  if (std::abs(z.dot(up)) > 0.999) up = Vec3::UnitY();
  const Vec3 x = z.cross(up).normalized();
  const Vec3 y = z.cross(x);
  cam.rotation.col(0) = x;
  cam.rotation.col(1) = y;
  cam.rotation.col(2) = z;

  const double half = 0.5 * fov_deg * M_PI / 180.0;
  cam.fx = 0.5 * width / std::tan(half);
  cam.fy = cam.fx;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  return cam;
}

Ray pixel_ray(const Camera& cam, const Vec2& pixel) {
  if (pixel.x() < 0.0 || pixel.x() > cam.width || pixel.y() < 0.0 ||
      pixel.y() > cam.height) {
    throw OutOfBoundsError("pixel_ray: pixel outside the sensor");
  }
  const Vec3 dir_cam((pixel.x() - cam.cx) / cam.fx,
                     (pixel.y() - cam.cy) / cam.fy, 1.0);
  Ray ray;
  ray.origin = cam.position;
  ray.dir = (cam.rotation * dir_cam).normalized();
  return ray;
}

Vec2 project(const Camera& cam, const Vec3& p) {
  const Vec3 pc = cam.rotation.transpose() * (p - cam.position);
  if (pc.z() <= 1e-12) {
    throw DomainError("project: point behind the camera");
  }
  return Vec2(cam.fx * pc.x() / pc.z() + cam.cx,
              cam.fy * pc.y() / pc.z() + cam.cy);
}

std::optional<std::pair<double, double>> intersect_box(const Ray& ray,
                                                       double lo, double hi) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double o = ray.origin[a];
    const double d = ray.dir[a];
    if (std::abs(d) < 1e-15) {
      if (o < lo || o > hi) return std::nullopt;
      continue;
    }
    double ta = (lo - o) / d;
    double tb = (hi - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  return std::make_pair(t0, t1);
}

}  // namespace neto
