#pragma once

#include <cstddef>
#include <functional>

namespace layerpot {

/// Worker count: LAYERPOT_THREADS if set (>= 1), else hardware concurrency.
int worker_count();

/// Splits [0, n) into contiguous blocks, one per worker. Each index is
/// visited exactly once and results never depend on the worker count as
/// long as the body writes only to its own indices.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace layerpot
