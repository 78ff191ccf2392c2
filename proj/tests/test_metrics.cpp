#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "neto/mesh.hpp"
#include "neto/metrics.hpp"
#include "neto/rng.hpp"
#include "neto/shapes.hpp"

using namespace neto;

namespace {

// Unit square in the z = z0 plane, two triangles.
TriangleMesh square_at(double z0) {
  TriangleMesh m;
  m.vertices = {Vec3(0, 0, z0), Vec3(1, 0, z0), Vec3(1, 1, z0),
                Vec3(0, 1, z0)};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

MatX random_cloud(Rng& rng, int n) {
  MatX pts(3, n);
  for (int i = 0; i < n; ++i) {
    pts.col(i) = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1),
                      rng.uniform(-1, 1));
  }
  return pts;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("identical meshes are a perfect reconstruction") {
  ShapeField sphere(shape_by_name("sphere"));
  const TriangleMesh ball =
      marching_cubes(sphere, Vec3(-1, -1, -1), Vec3(1, 1, 1), 32);
  ShapeField torus(shape_by_name("torus"));
  const TriangleMesh ring =
      marching_cubes(torus, Vec3(-1, -1, -1), Vec3(1, 1, 1), 32);
  const TriangleMesh slab = square_at(0.0);

  for (const TriangleMesh* mesh : {&ball, &ring, &slab}) {
    const MetricsReport r = evaluate(*mesh, *mesh, 0.01, 20000, 4);
    CHECK(r.accuracy == 0.0);
    CHECK(r.completeness == 0.0);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.f_score == 1.0);
    CHECK(r.n_samples == 20000);
    CHECK(r.tau == 0.01);
  }
}

TEST_CASE("translated slab reports its offset") {
  const TriangleMesh a = square_at(0.0);
  const TriangleMesh b = square_at(0.1);

  const MetricsReport near = evaluate(a, b, 0.2, 50000, 1);
  CHECK(std::abs(near.accuracy - 0.1) < 5e-4);
  CHECK(std::abs(near.completeness - 0.1) < 5e-4);
  CHECK(near.precision == 1.0);
  CHECK(near.recall == 1.0);
  CHECK(near.f_score == 1.0);

  const MetricsReport far = evaluate(a, b, 0.01, 50000, 1);
  CHECK(far.precision == 0.0);
  CHECK(far.recall == 0.0);
  CHECK(far.f_score == 0.0);
}

TEST_CASE("accuracy and completeness swap when the arguments swap") {
  ShapeField sphere(shape_by_name("sphere"));
  const TriangleMesh ball =
      marching_cubes(sphere, Vec3(-1, -1, -1), Vec3(1, 1, 1), 24);
  ShapeField torus(shape_by_name("torus"));
  const TriangleMesh ring =
      marching_cubes(torus, Vec3(-1, -1, -1), Vec3(1, 1, 1), 24);

  const MetricsReport ab = evaluate(ball, ring, 0.05, 30000, 11);
  const MetricsReport ba = evaluate(ring, ball, 0.05, 30000, 11);
  CHECK(ab.accuracy == ba.completeness);
  CHECK(ab.completeness == ba.accuracy);
  CHECK(ab.precision == ba.recall);
  CHECK(ab.recall == ba.precision);
}

TEST_CASE("kd-tree nearest distances equal the quadratic scan bitwise") {
  Rng rng(77);
  const MatX queries = random_cloud(rng, 1000);
  const MatX targets = random_cloud(rng, 700);
  const VecX fast = nearest_distances(queries, targets, false);
  const VecX slow = nearest_distances(queries, targets, true);
  REQUIRE(fast.size() == 1000);
  CHECK(fast == slow);

  // Nearest distance to a singleton is the plain norm. Materialize the
  // columns first; distances are defined on Vec3 operands and unmaterialized
  // column expressions can round differently in the last ulp.
  const MatX one = targets.leftCols(1);
  const VecX d = nearest_distances(queries, one, false);
  for (int i = 0; i < 10; ++i) {
    const Vec3 q = queries.col(i);
    const Vec3 p = one.col(0);
    CHECK(d[i] == std::sqrt((q - p).squaredNorm()));
  }
}

TEST_CASE("report json round trips exactly") {
  MetricsReport r;
  r.accuracy = 0.0123456789012345678;
  r.completeness = 3.0e-5;
  r.precision = 0.97;
  r.recall = 1.0 / 3.0;
  r.f_score = 0.49762732718341;
  r.tau = 0.01;
  r.n_samples = 12345;
  r.seed = 987654321;

  const std::filesystem::path path = "test_tmp/report.json";
  std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream os(path);
    os << metrics_to_json(r);
  }
  const MetricsReport back = metrics_from_json_file(path.string());
  CHECK(back.accuracy == r.accuracy);
  CHECK(back.completeness == r.completeness);
  CHECK(back.precision == r.precision);
  CHECK(back.recall == r.recall);
  CHECK(back.f_score == r.f_score);
  CHECK(back.tau == r.tau);
  CHECK(back.n_samples == r.n_samples);
  CHECK(back.seed == r.seed);
}

}  // TEST_SUITE
