#pragma once

#include <cstddef>
#include <functional>

namespace gsr {

/// Worker count from GSR_THREADS, else the hardware concurrency (at least 1).
std::size_t worker_count();

/// Runs fn(i) for i in [0, count) on up to `threads` workers. The first
/// exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

/// Keeps multi-MB autodiff buffers on the heap instead of fresh mmaps, which
/// otherwise dominate runtime through page faults. Best called first thing in
/// main; idempotent. No-op outside glibc.
void tune_allocator();

}  // namespace gsr
