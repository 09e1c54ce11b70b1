#pragma once

#include <cstddef>
#include <functional>

namespace depthpl {

/// Worker count from DEPTHPL_THREADS (unset or 0 means the hardware count).
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
/// handled exactly once; if any calls throw, the exception from the lowest
/// index is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t workers = worker_count());

}  // namespace depthpl
