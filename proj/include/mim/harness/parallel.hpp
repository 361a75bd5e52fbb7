#pragma once

#include <cstddef>
#include <functional>

namespace mim::harness {

// MIM_THREADS if set to a positive integer, else the hardware concurrency (at least 1).
std::size_t worker_count();

// Runs fn(i) for i in [0, n) on up to `workers` threads. Work items must not
// share mutable state. The first exception thrown is rethrown after all
// workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t workers = worker_count());

}  // namespace mim::harness
