#pragma once

#include <cstddef>
#include <functional>

namespace ottolab {

/// Worker count: hardware concurrency, capped by OTTOLAB_THREADS when set.
std::size_t worker_count();

/// Runs fn(begin, end) over disjoint chunks of [0, n). Chunk boundaries depend only
/// on n and the worker count, and callers write to disjoint slots, so results do
/// not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t min_chunk = 64);

} // namespace ottolab
