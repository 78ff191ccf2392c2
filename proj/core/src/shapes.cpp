#include "neto/shapes.hpp"

#include <algorithm>
#include <cmath>

namespace neto {
namespace {

double sd_sphere(const Vec3& p, const Vec3& c, double r) {
  return (p - c).norm() - r;
}

Vec3 grad_sphere(const Vec3& p, const Vec3& c) {
  const Vec3 d = p - c;
  const double n = d.norm();
  if (n < 1e-14) return Vec3(1.0, 0.0, 0.0);
  return d / n;
}

double sd_torus(const Vec3& p, const TorusSpec& t) {
  const Vec3 q = p - t.center;
  const double ring = std::hypot(q.x(), q.y()) - t.major;
  return std::hypot(ring, q.z()) - t.minor;
}

Vec3 grad_torus(const Vec3& p, const TorusSpec& t) {
  const Vec3 q = p - t.center;
  const double rxy = std::hypot(q.x(), q.y());
  const double ring = rxy - t.major;
  const double len = std::hypot(ring, q.z());
  if (rxy < 1e-14 || len < 1e-14) return Vec3(0.0, 0.0, 1.0);
  return Vec3(ring * q.x() / rxy, ring * q.y() / rxy, q.z()) / len;
}

double sd_rounded_box(const Vec3& p, const RoundedBoxSpec& b) {
  const Vec3 q = (p - b.center).cwiseAbs() - b.half;
  const Vec3 qp = q.cwiseMax(0.0);
  const double inside = std::min(0.0, q.maxCoeff());
  return qp.norm() + inside - b.rounding;
}

Vec3 grad_rounded_box(const Vec3& p, const RoundedBoxSpec& b) {
  const Vec3 d = p - b.center;
  const Vec3 q = d.cwiseAbs() - b.half;
  const Vec3 qp = q.cwiseMax(0.0);
  const double np = qp.norm();
  Vec3 g;
  if (np > 1e-14) {
    g = qp / np;
  } else {
    // Inside: gradient points along the axis of least clearance.
    int axis = 0;
    q.maxCoeff(&axis);
    g = Vec3::Zero();
    g[axis] = 1.0;
  }
  for (int a = 0; a < 3; ++a) g[a] *= d[a] < 0.0 ? -1.0 : 1.0;
  return g;
}

double sd_cylinder(const Vec3& p, const Vec2& c, double r, double h) {
  const double dr = std::hypot(p.x() - c.x(), p.y() - c.y()) - r;
  const double dz = std::abs(p.z()) - h;
  const double outside =
      std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
  return outside + std::min(std::max(dr, dz), 0.0);
}

Vec3 grad_cylinder(const Vec3& p, const Vec2& c, double r, double h) {
  const double px = p.x() - c.x();
  const double py = p.y() - c.y();
  const double rxy = std::hypot(px, py);
  const double dr = rxy - r;
  const double dz = std::abs(p.z()) - h;
  const double zsgn = p.z() < 0.0 ? -1.0 : 1.0;
  Vec3 radial(0.0, 0.0, 0.0);
  if (rxy > 1e-14) radial = Vec3(px / rxy, py / rxy, 0.0);
  if (dr > 0.0 && dz > 0.0) {
    const double len = std::hypot(dr, dz);
    return (dr * radial + Vec3(0.0, 0.0, dz * zsgn)) / len;
  }
  if (dr > dz) return radial;
  return Vec3(0.0, 0.0, zsgn);
}

}  // namespace

std::string shape_name(const ShapeSpec& s) {
  struct V {
    std::string operator()(const SphereSpec&) const { return "sphere"; }
    std::string operator()(const TorusSpec&) const { return "torus"; }
    std::string operator()(const RoundedBoxSpec&) const { return "box"; }
    std::string operator()(const BarbellSpec&) const { return "barbell"; }
    std::string operator()(const TwoCylindersSpec&) const {
      return "cylinders";
    }
  };
  return std::visit(V{}, s);
}

ShapeSpec shape_by_name(const std::string& name) {
  if (name == "sphere") return SphereSpec{};
  if (name == "torus") return TorusSpec{};
  if (name == "box") return RoundedBoxSpec{};
  if (name == "barbell") return BarbellSpec{};
  if (name == "cylinders") return TwoCylindersSpec{};
  throw ConfigError("unknown shape: " + name);
}

double analytic_sdf(const ShapeSpec& s, const Vec3& p) {
  struct V {
    const Vec3& p;
    double operator()(const SphereSpec& x) const {
      return sd_sphere(p, x.center, x.radius);
    }
    double operator()(const TorusSpec& x) const { return sd_torus(p, x); }
    double operator()(const RoundedBoxSpec& x) const {
      return sd_rounded_box(p, x);
    }
    double operator()(const BarbellSpec& x) const {
      return std::min(sd_sphere(p, x.center_a, x.radius_a),
                      sd_sphere(p, x.center_b, x.radius_b));
    }
    double operator()(const TwoCylindersSpec& x) const {
      return std::min(sd_cylinder(p, x.center_a, x.radius, x.half_height),
                      sd_cylinder(p, x.center_b, x.radius, x.half_height));
    }
  };
  return std::visit(V{p}, s);
}

std::pair<double, Vec3> analytic_sdf_grad(const ShapeSpec& s, const Vec3& p) {
  struct V {
    const Vec3& p;
    std::pair<double, Vec3> operator()(const SphereSpec& x) const {
      return {sd_sphere(p, x.center, x.radius), grad_sphere(p, x.center)};
    }
    std::pair<double, Vec3> operator()(const TorusSpec& x) const {
      return {sd_torus(p, x), grad_torus(p, x)};
    }
    std::pair<double, Vec3> operator()(const RoundedBoxSpec& x) const {
      return {sd_rounded_box(p, x), grad_rounded_box(p, x)};
    }
    std::pair<double, Vec3> operator()(const BarbellSpec& x) const {
      const double da = sd_sphere(p, x.center_a, x.radius_a);
      const double db = sd_sphere(p, x.center_b, x.radius_b);
      if (da <= db) return {da, grad_sphere(p, x.center_a)};
      return {db, grad_sphere(p, x.center_b)};
    }
    std::pair<double, Vec3> operator()(const TwoCylindersSpec& x) const {
      const double da =
          sd_cylinder(p, x.center_a, x.radius, x.half_height);
      const double db =
          sd_cylinder(p, x.center_b, x.radius, x.half_height);
      if (da <= db)
        return {da, grad_cylinder(p, x.center_a, x.radius, x.half_height)};
      return {db, grad_cylinder(p, x.center_b, x.radius, x.half_height)};
    }
  };
  return std::visit(V{p}, s);
}

void ShapeField::values(const MatX& pts, VecX& out) const {
  out.resize(pts.cols());
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    out[i] = analytic_sdf(spec_, pts.col(i));
  }
}

void ShapeField::value_grad(const MatX& pts, VecX& val, MatX& grad) const {
  val.resize(pts.cols());
  grad.resize(3, pts.cols());
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    auto [v, g] = analytic_sdf_grad(spec_, pts.col(i));
    val[i] = v;
    grad.col(i) = g;
  }
}

}  // namespace neto
