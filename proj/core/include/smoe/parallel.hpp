#pragma once

#include <cstddef>
#include <functional>

namespace smoe {

// Worker count for internal parallel loops: SMOE_THREADS when it is set to a
// positive integer, otherwise the hardware concurrency (at least 1).
std::size_t thread_budget();

// Runs fn(i) for every i in [0, count) on up to `threads` workers (0 means
// thread_budget()). Indices are handed out dynamically, so fn must write only
// to slots owned by its index. The first exception thrown by any call is
// rethrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn, std::size_t threads = 0);

}  // namespace smoe
