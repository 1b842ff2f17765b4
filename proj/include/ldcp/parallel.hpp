#pragma once

#include <cstddef>
#include <functional>

namespace ldcp {

/// Runs fn(i) for i in [0, n) on up to `threads` worker threads.
/// threads == 0 picks the hardware concurrency. Items are claimed from a
/// shared atomic counter, so results written to distinct slots indexed by i
/// are deterministic regardless of scheduling. The first exception thrown
/// by any item is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  unsigned threads = 0);

}  // namespace ldcp
