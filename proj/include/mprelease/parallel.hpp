#pragma once

#include <cstddef>
#include <functional>

namespace mprelease {

// Worker count: MPRELEASE_THREADS if set and positive, else hardware concurrency.
unsigned thread_count();

// Calls body(i) for i in [0, n). Each index is visited exactly once; callers
// write results into per-index slots so the outcome does not depend on the
// schedule. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace mprelease
