#pragma once

#include <cstddef>
#include <functional>

namespace ccd {

/// Worker cap: CHECKERBOARD_THREADS when set to a positive integer, else the
/// number of hardware threads (at least 1).
int worker_threads();

/// Runs body(i) for i in [0, n) on up to `threads` workers. Each index runs
/// exactly once; callers write results into per-index slots so output order
/// never depends on scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  int threads = worker_threads());

}  // namespace ccd
