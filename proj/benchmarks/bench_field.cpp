#include <benchmark/benchmark.h>

#include "neto/mlp.hpp"
#include "neto/rng.hpp"

using namespace neto;

namespace {

template <typename T>
MatXT<T> random_points(Eigen::Index n) {
  Rng rng(7);
  MatXT<T> pts(3, n);
  for (Eigen::Index i = 0; i < pts.size(); ++i)
    pts.data()[i] = static_cast<T>(rng.uniform(-1.0, 1.0));
  return pts;
}

template <typename T>
void bm_mlp_values(benchmark::State& state) {
  const auto p = make_mlp<T>(4, 128, 5, 3);
  const auto pts = random_points<T>(state.range(0));
  VecXT<T> out;
  for (auto _ : state) {
    mlp_values(p, pts, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <typename T>
void bm_mlp_value_grad(benchmark::State& state) {
  const auto p = make_mlp<T>(4, 128, 5, 3);
  const auto pts = random_points<T>(state.range(0));
  VecXT<T> val;
  MatXT<T> grad;
  for (auto _ : state) {
    mlp_value_grad(p, pts, val, grad);
    benchmark::DoNotOptimize(grad.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <typename T>
void bm_mlp_pullback(benchmark::State& state) {
  const auto p = make_mlp<T>(4, 128, 5, 3);
  const auto pts = random_points<T>(state.range(0));
  VecXT<T> val;
  MatXT<T> grad;
  MlpState<T> st;
  mlp_value_grad(p, pts, val, grad, &st);
  VecXT<T> ubar = VecXT<T>::Ones(pts.cols());
  MatXT<T> vbar = MatXT<T>::Ones(3, pts.cols());
  for (auto _ : state) {
    auto grads = MlpGrads<T>::zeros_like(p);
    mlp_pullback(p, st, ubar, vbar, grads);
    benchmark::DoNotOptimize(grads.log_s);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK_TEMPLATE(bm_mlp_values, float)->Arg(128)->Arg(4096);
BENCHMARK_TEMPLATE(bm_mlp_values, double)->Arg(128)->Arg(4096);
BENCHMARK_TEMPLATE(bm_mlp_value_grad, float)->Arg(128)->Arg(4096);
BENCHMARK_TEMPLATE(bm_mlp_value_grad, double)->Arg(128)->Arg(4096);
BENCHMARK_TEMPLATE(bm_mlp_pullback, float)->Arg(128)->Arg(4096);
