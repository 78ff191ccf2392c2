#include <doctest.h>

#include <cmath>

#include "neto/geometry.hpp"
#include "neto/rng.hpp"
#include "neto/types.hpp"

using namespace neto;

namespace {

// Random unit incident/normal pair with the opposing orientation refract
// requires. The incidence angle is drawn away from grazing so the non-TIR
// branch stays well conditioned.
std::pair<Vec3, Vec3> random_interface(Rng& rng, double max_angle) {
  Vec3 n = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
  Vec3 t = n.cross(Vec3(rng.normal(), rng.normal(), rng.normal()));
  while (t.norm() < 1e-6) {
    t = n.cross(Vec3(rng.normal(), rng.normal(), rng.normal()));
  }
  t.normalize();
  const double theta = rng.uniform(0.0, max_angle);
  const Vec3 incident = -std::cos(theta) * n + std::sin(theta) * t;
  return {incident, n};
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("refract satisfies Snell, coplanarity, and reversibility") {
  const OpticalConstants oc;
  Rng rng(7);
  int checked = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const bool entering = trial % 2 == 0;
    const double eta =
        entering ? oc.n_outside / oc.n_inside : oc.n_inside / oc.n_outside;
    const double max_angle =
        eta <= 1.0 ? 1.55 : 0.95 * std::asin(1.0 / eta);
    auto [incident, normal] = random_interface(rng, max_angle);
    const auto r = refract<double>(incident, normal, eta);
    REQUIRE_FALSE(r.tir);

    const double sin_in = incident.cross(normal).norm();
    const double sin_out = r.dir.cross(normal).norm();
    CHECK(std::abs(eta * sin_in - sin_out) < 1e-12);

    // Transmitted ray stays in the plane of incidence and crosses the
    // interface (same sign of the normal component as the incident ray).
    const Vec3 plane_n = incident.cross(normal);
    if (plane_n.norm() > 1e-9) {
      CHECK(std::abs(r.dir.dot(plane_n.normalized())) < 1e-12);
    }
    CHECK(r.dir.dot(normal) < 0.0);
    CHECK(r.dir.norm() == doctest::Approx(1.0).epsilon(1e-12));

    const auto back = refract<double>(-r.dir, -normal, 1.0 / eta);
    REQUIRE_FALSE(back.tir);
    CHECK((back.dir + incident).norm() < 1e-9);
    ++checked;
  }
  CHECK(checked == 2000);
}

TEST_CASE("refract rejects a normal that does not oppose the ray") {
  const Vec3 incident = Vec3(0, 0, 1);
  CHECK_THROWS_AS(refract<double>(incident, Vec3(0, 0, 1), 0.7),
                  DomainError);
  CHECK_THROWS_AS(refract<double>(incident, Vec3(1, 0, 0), 0.7),
                  DomainError);
}

TEST_CASE("TIR boundary sits at the critical angle") {
  const OpticalConstants oc;
  const double eta = oc.n_inside / oc.n_outside;  // dense to rare
  const Vec3 n = Vec3::UnitZ();
  auto tir_at = [&](double theta) {
    const Vec3 incident(std::sin(theta), 0.0, -std::cos(theta));
    return refract<double>(incident, n, eta).tir;
  };
  double lo = 0.1, hi = 1.5;
  REQUIRE_FALSE(tir_at(lo));
  REQUIRE(tir_at(hi));
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (tir_at(mid) ? hi : lo) = mid;
  }
  const double critical = std::asin(oc.n_outside / oc.n_inside);
  CHECK(std::abs(0.5 * (lo + hi) - critical) < 1e-9);
}

TEST_CASE("refract_pullback matches central finite differences") {
  Rng rng(11);
  const double fd_h = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    const double eta = trial % 2 == 0 ? 0.679 : 1.31;
    const double max_angle = eta <= 1.0 ? 1.4 : 0.9 * std::asin(1.0 / eta);
    auto [incident, normal] = random_interface(rng, max_angle);
    const Vec3 a(rng.normal(), rng.normal(), rng.normal());

    Vec3 d_incident = Vec3::Zero();
    Vec3 d_normal = Vec3::Zero();
    refract_pullback<double>(incident, normal, eta, a, d_incident, d_normal);

    auto loss = [&](const Vec3& i, const Vec3& n) {
      return a.dot(refract<double>(i, n, eta).dir);
    };
    for (int c = 0; c < 3; ++c) {
      Vec3 ip = incident, im = incident;
      ip[c] += fd_h;
      im[c] -= fd_h;
      const double fd = (loss(ip, normal) - loss(im, normal)) / (2 * fd_h);
      CHECK(d_incident[c] == doctest::Approx(fd).epsilon(1e-5));

      Vec3 np = normal, nm = normal;
      np[c] += fd_h;
      nm[c] -= fd_h;
      const double fdn = (loss(incident, np) - loss(incident, nm)) / (2 * fd_h);
      CHECK(d_normal[c] == doctest::Approx(fdn).epsilon(1e-5));
    }
  }
}

TEST_CASE("monitor plane uv round trip") {
  MonitorPlane plane;
  plane.origin = Vec3(0.3, -0.2, 2.5);
  plane.normal = Vec3(0, 0, -1);
  plane.u_axis = Vec3(1, 0, 0);
  plane.v_axis = Vec3(0, 1, 0);
  plane.extent = Vec2(0.8, 0.6);

  const Vec2 uv(0.31, -0.44);
  const Vec3 p = plane.from_uv(uv);
  CHECK((plane.to_uv(p) - uv).norm() < 1e-12);
  CHECK(plane.half_diagonal() == doctest::Approx(std::hypot(0.8, 0.6)));
}

TEST_CASE("intersect_plane handles hits, parallels, and backward rays") {
  MonitorPlane plane;
  plane.origin = Vec3(0, 0, 2);
  plane.normal = Vec3(0, 0, -1);

  Ray ray{Vec3(0.5, -0.5, 0), Vec3(0, 0, 1)};
  const auto hit = intersect_plane(plane, ray);
  REQUIRE(hit.has_value());
  CHECK((*hit - Vec3(0.5, -0.5, 2)).norm() < 1e-12);

  Ray parallel{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  CHECK_FALSE(intersect_plane(plane, parallel).has_value());

  Ray away{Vec3(0, 0, 0), Vec3(0, 0, -1)};
  CHECK_FALSE(intersect_plane(plane, away).has_value());
}

TEST_CASE("camera projects pixel rays back onto themselves") {
  const Camera cam =
      look_at_camera(Vec3(2.1, -1.4, 0.9), Vec3::Zero(), 40.0, 64, 48);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Vec2 px(rng.uniform(0.0, 64.0), rng.uniform(0.0, 48.0));
    const Ray ray = pixel_ray(cam, px);
    CHECK(ray.dir.norm() == doctest::Approx(1.0).epsilon(1e-12));
    const Vec3 p = ray.origin + rng.uniform(0.5, 4.0) * ray.dir;
    const Vec2 back = project(cam, p);
    CHECK((back - px).norm() < 1e-9);
  }
  CHECK_THROWS_AS(pixel_ray(cam, Vec2(-0.5, 10.0)), OutOfBoundsError);
  CHECK_THROWS_AS(pixel_ray(cam, Vec2(10.0, 48.5)), OutOfBoundsError);
  CHECK_THROWS_AS(project(cam, cam.position), DomainError);
}

TEST_CASE("intersect_box clips to the forward interval") {
  Ray ray{Vec3(-3, 0.2, 0.1), Vec3(1, 0, 0)};
  const auto span = intersect_box(ray, -1.0, 1.0);
  REQUIRE(span.has_value());
  CHECK(span->first == doctest::Approx(2.0));
  CHECK(span->second == doctest::Approx(4.0));

  Ray inside{Vec3::Zero(), Vec3(0, 1, 0)};
  const auto from_inside = intersect_box(inside, -1.0, 1.0);
  REQUIRE(from_inside.has_value());
  CHECK(from_inside->first == doctest::Approx(0.0));
  CHECK(from_inside->second == doctest::Approx(1.0));

  Ray miss{Vec3(-3, 2.5, 0), Vec3(1, 0, 0)};
  CHECK_FALSE(intersect_box(miss, -1.0, 1.0).has_value());
}

}  // TEST_SUITE
