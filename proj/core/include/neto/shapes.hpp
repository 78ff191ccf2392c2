#pragma once

#include <string>
#include <variant>

#include "neto/field.hpp"
#include "neto/types.hpp"

namespace neto {

struct SphereSpec {
  Vec3 center = Vec3::Zero();
  double radius = 0.35;
};

/// Torus around the z axis.
struct TorusSpec {
  Vec3 center = Vec3::Zero();
  double major = 0.35;
  double minor = 0.15;
};

struct RoundedBoxSpec {
  Vec3 center = Vec3::Zero();
  Vec3 half = Vec3(0.30, 0.25, 0.20);
  double rounding = 0.05;
};

/// Two disjoint spheres on the x axis; rays near the gap traverse both.
struct BarbellSpec {
  Vec3 center_a = Vec3(-0.33, 0.0, 0.0);
  Vec3 center_b = Vec3(0.33, 0.0, 0.0);
  double radius_a = 0.28;
  double radius_b = 0.28;
};

/// Two parallel capped cylinders along z, one partly behind the other when
/// viewed along x.
struct TwoCylindersSpec {
  Vec2 center_a = Vec2(-0.22, 0.0);
  Vec2 center_b = Vec2(0.22, 0.0);
  double radius = 0.14;
  double half_height = 0.50;
};

using ShapeSpec = std::variant<SphereSpec, TorusSpec, RoundedBoxSpec,
                               BarbellSpec, TwoCylindersSpec>;

/// Stable identifier used on the command line and in dataset manifests.
std::string shape_name(const ShapeSpec& s);

/// Shape with default parameters for a given identifier. Throws ConfigError
/// for unknown names.
ShapeSpec shape_by_name(const std::string& name);

/// Signed distance (negative inside). Exact outside; inside a union it is a
/// lower bound on the distance to the surface, which is all the consumers
/// (sign tests and sphere tracing) need.
double analytic_sdf(const ShapeSpec& s, const Vec3& p);

/// Signed distance and its spatial gradient. On min-seams and centers the
/// gradient of one branch is returned.
std::pair<double, Vec3> analytic_sdf_grad(const ShapeSpec& s, const Vec3& p);

/// ScalarField view of an analytic shape.
class ShapeField final : public ScalarField {
 public:
  explicit ShapeField(ShapeSpec spec) : spec_(std::move(spec)) {}

  void values(const MatX& pts, VecX& out) const override;
  void value_grad(const MatX& pts, VecX& val, MatX& grad) const override;

  const ShapeSpec& spec() const { return spec_; }

 private:
  ShapeSpec spec_;
};

}  // namespace neto
