#pragma once

// Data-parallel kernels. Each OpenMP version has a serial reference with the
// same signature; tests require them to agree bit-for-bit.

#include <span>
#include <vector>

#include "traylab/physics.hpp"

namespace traylab::kernels {

std::vector<SimResult> simulate_batch_serial(std::span<const SceneSpec> scenes, const SimConfig& config);

/// One scene per OpenMP iteration (dynamic schedule). Results are in input order.
std::vector<SimResult> simulate_batch(std::span<const SceneSpec> scenes, const SimConfig& config);

/// Number of worker threads OpenMP will use for the next parallel region.
int max_threads();
void set_threads(int n);

}  // namespace traylab::kernels
