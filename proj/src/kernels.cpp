#include "traylab/kernels.hpp"

#include <exception>

#include <omp.h>

namespace traylab::kernels {

std::vector<SimResult> simulate_batch_serial(std::span<const SceneSpec> scenes, const SimConfig& config) {
  std::vector<SimResult> results;
  results.reserve(scenes.size());
  for (const auto& scene : scenes) results.push_back(run_simulation(scene, config));
  return results;
}

std::vector<SimResult> simulate_batch(std::span<const SceneSpec> scenes, const SimConfig& config) {
  std::vector<SimResult> results(scenes.size());
  std::exception_ptr failure;
  const auto n = static_cast<long>(scenes.size());

#pragma omp parallel for schedule(dynamic, 1) if (n > 1)
  for (long i = 0; i < n; ++i) {
    try {
      results[static_cast<std::size_t>(i)] = run_simulation(scenes[static_cast<std::size_t>(i)], config);
    } catch (...) {
#pragma omp critical(traylab_batch_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

int max_threads() { return omp_get_max_threads(); }

void set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

}  // namespace traylab::kernels
