#pragma once

#include <cstddef>
#include <functional>

namespace fcce {

/// Worker count: the FCCE_THREADS environment variable when set to a positive
/// integer, otherwise the hardware concurrency (at least 1).
std::size_t thread_count();

/// Runs body(i) for i in [0, n) on up to `threads` workers. Each index runs exactly
/// once; the first exception thrown is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, std::size_t threads = thread_count());

}  // namespace fcce
