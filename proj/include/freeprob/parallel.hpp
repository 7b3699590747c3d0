#pragma once

#include <cstddef>
#include <functional>

namespace freeprob {

/// Worker count: FREEPROB_THREADS if set and positive, else the hardware concurrency.
unsigned thread_count();

/// Runs body(i) for i in [0, n) across thread_count() workers; rethrows the first exception.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace freeprob
