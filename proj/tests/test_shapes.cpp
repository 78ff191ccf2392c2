#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "neto/rng.hpp"
#include "neto/shapes.hpp"

using namespace neto;

namespace {

const std::vector<std::string> kNames = {
    "sphere", "torus", "box", "barbell", "cylinders"};

// Central-difference gradient of the analytic SDF.
Vec3 fd_grad(const ShapeSpec& s, const Vec3& p, double h) {
  Vec3 g;
  for (int c = 0; c < 3; ++c) {
    Vec3 a = p, b = p;
    a[c] += h;
    b[c] -= h;
    g[c] = (analytic_sdf(s, a) - analytic_sdf(s, b)) / (2 * h);
  }
  return g;
}

// Distance from a point to a min-seam or symmetry locus where the gradient
// legitimately jumps; FD checks skip a small neighborhood around those.
double seam_margin(const ShapeSpec& s, const Vec3& p) {
  if (std::holds_alternative<SphereSpec>(s)) {
    return (p - std::get<SphereSpec>(s).center).norm();
  }
  if (std::holds_alternative<TorusSpec>(s)) {
    const auto& t = std::get<TorusSpec>(s);
    const Vec3 q = p - t.center;
    return std::hypot(q.x(), q.y());  // degenerate on the axis
  }
  if (std::holds_alternative<RoundedBoxSpec>(s)) {
    const auto& b = std::get<RoundedBoxSpec>(s);
    const Vec3 q = (p - b.center).cwiseAbs() - b.half;
    double m = 1e9;
    for (int c = 0; c < 3; ++c) {
      m = std::min(m, std::abs(q[c]));
      m = std::min(m, std::abs((p - b.center)[c]));  // |.| kink planes
      for (int d = c + 1; d < 3; ++d)
        m = std::min(m, std::abs(q[c] - q[d]));  // interior argmax ties
    }
    return m;
  }
  if (std::holds_alternative<BarbellSpec>(s)) {
    const auto& bb = std::get<BarbellSpec>(s);
    const double da = (p - bb.center_a).norm() - bb.radius_a;
    const double db = (p - bb.center_b).norm() - bb.radius_b;
    return std::abs(da - db);  // min seam between the two spheres
  }
  const auto& tc = std::get<TwoCylindersSpec>(s);
  const Vec2 xy(p.x(), p.y());
  const double da = (xy - tc.center_a).norm();
  const double db = (xy - tc.center_b).norm();
  double m = std::abs((da - tc.radius) - (db - tc.radius));
  m = std::min(m, std::min(da, db));  // cylinder axes
  m = std::min(m, std::abs(std::abs(p.z()) - tc.half_height));
  m = std::min(m, std::abs((std::min(da, db) - tc.radius) -
                           (std::abs(p.z()) - tc.half_height)));
  return m;
}

}  // namespace

TEST_SUITE("shapes") {

TEST_CASE("name round trip and unknown rejection") {
  for (const auto& name : kNames) {
    CHECK(shape_name(shape_by_name(name)) == name);
  }
  CHECK_THROWS_AS(shape_by_name("dodecahedron"), ConfigError);
}

TEST_CASE("sphere distance is exact everywhere") {
  SphereSpec sp;
  sp.center = Vec3(0.1, -0.2, 0.05);
  sp.radius = 0.4;
  ShapeSpec s = sp;
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const Vec3 p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const double want = (p - sp.center).norm() - sp.radius;
    CHECK(analytic_sdf(s, p) == doctest::Approx(want).epsilon(1e-14));
  }
}

TEST_CASE("known distances for the remaining shapes") {
  // Torus: on the tube circle the distance is -minor.
  ShapeSpec torus = shape_by_name("torus");
  const auto& t = std::get<TorusSpec>(torus);
  CHECK(analytic_sdf(torus, Vec3(t.major, 0, 0)) ==
        doctest::Approx(-t.minor).epsilon(1e-12));
  CHECK(analytic_sdf(torus, Vec3(t.major + t.minor, 0, 0)) ==
        doctest::Approx(0.0).scale(1).epsilon(1e-12));
  CHECK(analytic_sdf(torus, Vec3(0, 0, 1.0)) > 0.5);

  // Rounded box: face distance along +x from outside.
  ShapeSpec box = shape_by_name("box");
  const auto& b = std::get<RoundedBoxSpec>(box);
  CHECK(analytic_sdf(box, Vec3(b.half.x() + b.rounding + 0.2, 0, 0)) ==
        doctest::Approx(0.2).epsilon(1e-12));
  CHECK(analytic_sdf(box, Vec3::Zero()) < 0.0);

  // Barbell: outside either sphere the union distance is the smaller one.
  ShapeSpec bb = shape_by_name("barbell");
  const auto& bar = std::get<BarbellSpec>(bb);
  const Vec3 probe(1.0, 0, 0);
  const double want = std::min((probe - bar.center_a).norm() - bar.radius_a,
                               (probe - bar.center_b).norm() - bar.radius_b);
  CHECK(analytic_sdf(bb, probe) == doctest::Approx(want).epsilon(1e-12));
  // The gap between the spheres is outside the solid.
  CHECK(analytic_sdf(bb, Vec3::Zero()) > 0.0);

  // Two cylinders: radial distance at mid-height.
  ShapeSpec cyl = shape_by_name("cylinders");
  const auto& tc = std::get<TwoCylindersSpec>(cyl);
  const Vec3 probe_c(tc.center_a.x(), tc.center_a.y() + tc.radius + 0.1, 0.0);
  CHECK(analytic_sdf(cyl, probe_c) == doctest::Approx(0.1).epsilon(1e-10));
  CHECK(analytic_sdf(cyl, Vec3(tc.center_a.x(), tc.center_a.y(), 0.0)) < 0.0);
}

TEST_CASE("analytic gradients match finite differences") {
  Rng rng(17);
  const double h = 1e-6;
  for (const auto& name : kNames) {
    const ShapeSpec s = shape_by_name(name);
    int accepted = 0;
    while (accepted < 300) {
      const Vec3 p(rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9),
                   rng.uniform(-0.9, 0.9));
      if (seam_margin(s, p) < 1e-3) continue;
      if (std::abs(analytic_sdf(s, p)) < 1e-4) continue;
      const auto [val, grad] = analytic_sdf_grad(s, p);
      CHECK(val == doctest::Approx(analytic_sdf(s, p)).epsilon(1e-12));
      const Vec3 fd = fd_grad(s, p, h);
      CHECK((grad - fd).norm() < 2e-6);
      // Away from seams a distance field has a unit gradient.
      CHECK(grad.norm() == doctest::Approx(1.0).epsilon(1e-6));
      ++accepted;
    }
  }
}

TEST_CASE("ShapeField batches agree with the scalar interface") {
  const ShapeSpec s = shape_by_name("barbell");
  ShapeField field(s);
  Rng rng(23);
  MatX pts(3, 64);
  for (int i = 0; i < 64; ++i) {
    pts.col(i) =
        Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  }
  VecX val;
  MatX grad;
  field.value_grad(pts, val, grad);
  VecX val_only;
  field.values(pts, val_only);
  REQUIRE(val.size() == 64);
  REQUIRE(grad.cols() == 64);
  for (int i = 0; i < 64; ++i) {
    const Vec3 p = pts.col(i);
    CHECK(val[i] == doctest::Approx(analytic_sdf(s, p)).epsilon(1e-12));
    CHECK(val_only[i] == doctest::Approx(val[i]).epsilon(1e-14));
    const auto [v, g] = analytic_sdf_grad(s, p);
    CHECK((grad.col(i) - g).norm() < 1e-12);
  }
}

}  // TEST_SUITE
