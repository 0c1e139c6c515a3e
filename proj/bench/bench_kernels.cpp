// Serial reference against the OpenMP version of each kernel.

#include <benchmark/benchmark.h>

#include "traylab/dataset.hpp"
#include "traylab/kernels.hpp"
#include "traylab/render.hpp"

using namespace traylab;

namespace {

const std::vector<ProblemInstance>& problems() {
  static const std::vector<ProblemInstance> ps = [] {
    DatasetConfig cfg;
    cfg.n_problems = 8;
    cfg.seed = 11;
    return generate_dataset(cfg);
  }();
  return ps;
}

std::vector<SceneSpec> scenes(std::size_t n) {
  std::vector<SceneSpec> out;
  for (std::size_t i = 0; i < n; ++i) {
    const ProblemInstance& p = problems()[i % problems().size()];
    out.push_back(task_scene(p, p.class_params));
  }
  return out;
}

void BM_simulate_batch_serial(benchmark::State& state) {
  const auto s = scenes(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::simulate_batch_serial(s, SimConfig{}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_simulate_batch(benchmark::State& state) {
  const auto s = scenes(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::simulate_batch(s, SimConfig{}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_render_serial(benchmark::State& state) {
  const SceneLayout& layout = problems().front().task_layout;
  for (auto _ : state) benchmark::DoNotOptimize(render_top_down_serial(layout));
}

void BM_render(benchmark::State& state) {
  const SceneLayout& layout = problems().front().task_layout;
  for (auto _ : state) benchmark::DoNotOptimize(render_top_down(layout));
}

void BM_psnr_serial(benchmark::State& state) {
  const Raster a = render_top_down(problems()[0].task_layout);
  const Raster b = render_top_down(problems()[1].task_layout);
  for (auto _ : state) benchmark::DoNotOptimize(psnr_serial(a, b));
}

void BM_psnr(benchmark::State& state) {
  const Raster a = render_top_down(problems()[0].task_layout);
  const Raster b = render_top_down(problems()[1].task_layout);
  for (auto _ : state) benchmark::DoNotOptimize(psnr(a, b));
}

}  // namespace

BENCHMARK(BM_simulate_batch_serial)->Arg(11)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_simulate_batch)->Arg(11)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_render_serial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_render)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_psnr_serial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_psnr)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
