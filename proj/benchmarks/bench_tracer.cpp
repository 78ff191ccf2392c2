#include <benchmark/benchmark.h>

#include "neto/adam.hpp"
#include "neto/dataset.hpp"
#include "neto/mlp.hpp"
#include "neto/sampling.hpp"
#include "neto/tracer.hpp"

using namespace neto;

namespace {

template <typename T>
void bm_volume_intersect(benchmark::State& state) {
  auto p = make_mlp<T>(4, 128, 5, 3);
  init_sphere<T>(p, T(0.42), 5, 600, 256);
  const MlpFieldRef<T> field(p);
  const T s = p.sharpness();
  SamplingConfigT<T> cfg;
  RayT<T> ray;
  ray.origin = Vec3T<T>(T(0.05), T(-0.02), T(-3));
  ray.dir = Vec3T<T>(0, 0, 1);
  for (auto _ : state) {
    auto hit = volume_intersect<T>(field, s, ray, cfg, false);
    benchmark::DoNotOptimize(hit.hit.t_hat);
  }
}

template <typename T>
void bm_two_bounce(benchmark::State& state) {
  auto p = make_mlp<T>(4, 128, 5, 3);
  init_sphere<T>(p, T(0.42), 5, 600, 256);
  const MlpFieldRef<T> field(p);
  const T s = p.sharpness();
  SamplingConfigT<T> cfg;
  RigSpec rig;
  const Camera cam = rig_camera(rig, 0);
  MonitorPlane plane = rig_plane(rig, cam);
  plane.extent = Vec2(2, 2);
  const Ray r = pixel_ray(cam, Vec2(32.5, 32.5));
  RayT<T> ray;
  ray.origin = r.origin.template cast<T>();
  ray.dir = r.dir.template cast<T>();
  for (auto _ : state) {
    auto path = trace_two_bounce<T>(field, s, ray, plane, rig.constants, cfg);
    benchmark::DoNotOptimize(path.status);
  }
}

template <typename T>
void bm_occlusion_check(benchmark::State& state) {
  auto p = make_mlp<T>(4, 128, 5, 3);
  init_sphere<T>(p, T(0.42), 5, 600, 256);
  const MlpFieldRef<T> field(p);
  const T s = p.sharpness();
  SamplingConfigT<T> cfg;
  RayT<T> ray;
  ray.origin = Vec3T<T>(T(0.05), T(-0.02), T(-3));
  ray.dir = Vec3T<T>(0, 0, 1);
  const auto hit = volume_intersect<T>(field, s, ray, cfg, false);
  for (auto _ : state) {
    bool occ = check_self_occlusion<T>(field, s, hit.hit, ray.dir, cfg);
    benchmark::DoNotOptimize(occ);
  }
}

}  // namespace

BENCHMARK_TEMPLATE(bm_volume_intersect, float);
BENCHMARK_TEMPLATE(bm_volume_intersect, double);
BENCHMARK_TEMPLATE(bm_two_bounce, float);
BENCHMARK_TEMPLATE(bm_two_bounce, double);
BENCHMARK_TEMPLATE(bm_occlusion_check, float);
