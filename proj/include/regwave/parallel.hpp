#pragma once

#include <cstddef>
#include <functional>

namespace regwave {

// Worker count from REGWAVE_WORKERS, else hardware concurrency (at least 1).
int default_worker_count();

// Runs body(i) for i in [0, count) on up to `workers` threads. Each index
// runs once; after the first exception no new index starts, and the
// exception is rethrown once all workers stop.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body);

}  // namespace regwave
