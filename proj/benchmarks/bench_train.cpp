#include <benchmark/benchmark.h>

#include <filesystem>

#include "neto/dataset.hpp"
#include "neto/shapes.hpp"
#include "neto/train.hpp"

using namespace neto;

namespace {

const Dataset& bench_dataset() {
  static const Dataset ds = [] {
    const std::filesystem::path dir = "bench_tmp/sphere";
    std::filesystem::remove_all(dir);
    RigSpec rig;
    rig.n_views = 4;
    rig.width = 32;
    rig.height = 32;
    rig.gt_resolution = 64;
    return generate_dataset(shape_by_name("sphere"), rig, 1, dir);
  }();
  return ds;
}

// Full production-scale step: plan (tracing) plus replay with gradients and
// the optimizer update.
void bm_train_step(benchmark::State& state) {
  TrainConfig<float> cfg;
  cfg.batch_size = static_cast<int>(state.range(0));
  auto params = make_mlp<float>(4, 128, 5, 1);
  init_sphere<float>(params, 0.42f, 5, 600, 256);
  Trainer<float> tr(bench_dataset(), std::move(params), cfg);
  for (auto _ : state) {
    const auto res = tr.step();
    benchmark::DoNotOptimize(res.total);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void bm_make_plan(benchmark::State& state) {
  TrainConfig<float> cfg;
  cfg.batch_size = static_cast<int>(state.range(0));
  auto params = make_mlp<float>(4, 128, 5, 1);
  init_sphere<float>(params, 0.42f, 5, 600, 256);
  Trainer<float> tr(bench_dataset(), std::move(params), cfg);
  for (auto _ : state) {
    const auto plan = tr.make_plan(0);
    benchmark::DoNotOptimize(plan.n_eik_pts);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void bm_eval_plan_grads(benchmark::State& state) {
  TrainConfig<float> cfg;
  cfg.batch_size = static_cast<int>(state.range(0));
  auto params = make_mlp<float>(4, 128, 5, 1);
  init_sphere<float>(params, 0.42f, 5, 600, 256);
  Trainer<float> tr(bench_dataset(), std::move(params), cfg);
  const auto plan = tr.make_plan(0);
  for (auto _ : state) {
    auto grads = MlpGrads<float>::zeros_like(tr.params());
    const auto res = tr.eval_plan(plan, &grads);
    benchmark::DoNotOptimize(res.total);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(bm_train_step)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_make_plan)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_eval_plan_grads)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);
