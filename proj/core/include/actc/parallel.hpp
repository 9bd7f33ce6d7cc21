#pragma once

#include <cstddef>
#include <functional>

namespace actc {

/// Worker count: hardware concurrency, capped by the ACTC_THREADS environment variable.
[[nodiscard]] std::size_t thread_budget();

/// Runs fn(i) for i in [0, n) across up to thread_budget() threads.
///
/// The callable must only write to per-index state; any exception thrown by a
/// task is rethrown on the calling thread after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace actc
