#pragma once

#include <cstddef>
#include <functional>

namespace tailscore {

/// Worker count used when a caller passes 0: the THREADS environment variable
/// if set, otherwise the hardware concurrency.
int default_threads();

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
/// handled exactly once; callers write results to slot i so the outcome does
/// not depend on the worker count. The first exception thrown is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body, int threads = 0);

}  // namespace tailscore
