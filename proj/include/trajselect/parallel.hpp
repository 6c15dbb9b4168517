#pragma once

#include <cstddef>
#include <functional>

namespace trajselect {

// Worker count: hardware concurrency, capped by the TRAJSELECT_THREADS
// environment variable and by the number of work items.
std::size_t worker_count(std::size_t n_items);

// Runs fn(i) for i in [0, n). Workers own disjoint contiguous index ranges;
// callers must write results into per-index slots so the outcome is the same
// for any worker count. Exceptions from workers are rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace trajselect
