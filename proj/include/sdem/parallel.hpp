#pragma once

#include <cstddef>
#include <functional>

namespace sdem {

/// Worker count from SDEM_WORKERS, else the hardware concurrency (at least 1).
std::size_t default_workers();

/// Calls body(i) for every i in [0, count) using up to `workers` threads.
///
/// Indices are handed out in contiguous chunks; callers write results into
/// slot i and reduce afterwards in ascending order, which keeps aggregates
/// independent of the worker count. The first exception thrown by any body
/// is rethrown on the calling thread after all workers have joined.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace sdem
