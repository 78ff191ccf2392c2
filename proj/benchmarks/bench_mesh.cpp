#include <benchmark/benchmark.h>

#include "neto/mesh.hpp"
#include "neto/metrics.hpp"
#include "neto/shapes.hpp"

using namespace neto;

namespace {

void bm_marching_cubes(benchmark::State& state) {
  const ShapeField field(shape_by_name("torus"));
  const Vec3 b(1, 1, 1);
  const int res = static_cast<int>(state.range(0));
  for (auto _ : state) {
    const auto mesh = marching_cubes(field, -b, b, res);
    benchmark::DoNotOptimize(mesh.vertices.size());
  }
}

void bm_nearest_distances(benchmark::State& state) {
  const ShapeField field(shape_by_name("torus"));
  const auto mesh = marching_cubes(field, Vec3(-1, -1, -1), Vec3(1, 1, 1), 64);
  const int n = static_cast<int>(state.range(0));
  const MatX a = sample_surface(mesh, n, 3);
  const MatX b = sample_surface(mesh, n, 4);
  for (auto _ : state) {
    const VecX d = nearest_distances(a, b);
    benchmark::DoNotOptimize(d.sum());
  }
  state.SetItemsProcessed(state.iterations() * n);
}

void bm_evaluate(benchmark::State& state) {
  const ShapeField torus(shape_by_name("torus"));
  const ShapeField ball(shape_by_name("sphere"));
  const auto a = marching_cubes(torus, Vec3(-1, -1, -1), Vec3(1, 1, 1), 64);
  const auto b = marching_cubes(ball, Vec3(-1, -1, -1), Vec3(1, 1, 1), 64);
  for (auto _ : state) {
    const auto rep = evaluate(a, b, 0.01, static_cast<int>(state.range(0)), 1);
    benchmark::DoNotOptimize(rep.f_score);
  }
}

}  // namespace

BENCHMARK(bm_marching_cubes)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_nearest_distances)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_evaluate)->Arg(100000)->Unit(benchmark::kMillisecond);
