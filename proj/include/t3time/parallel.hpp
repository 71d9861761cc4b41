#pragma once

#include <cstddef>
#include <functional>

namespace t3time {

/// Worker cap: T3TIME_THREADS if set and positive, else hardware concurrency.
std::size_t max_threads();
void set_max_threads(std::size_t n);

/// Runs fn(begin, end) over disjoint chunks of [0, n). Chunks write disjoint
/// outputs, so results do not depend on the thread count. Work below
/// `min_items_per_thread` per worker stays on the calling thread.
void parallel_for(std::size_t n, std::size_t min_items_per_thread,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace t3time
