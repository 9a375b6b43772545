#pragma once

#include <cstddef>
#include <functional>

namespace flexio {

/// Worker count: `requested` if positive, else the hardware concurrency. Either
/// way capped by the FLEXIO_THREADS environment variable when it is set.
int thread_count(int requested = 0);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Indices are handed
/// out in order; the first exception thrown is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int threads = 0);

}  // namespace flexio
