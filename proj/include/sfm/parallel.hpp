#pragma once

#include <cstddef>
#include <functional>

namespace sfm {

/// Thread cap from the SFM_THREADS environment variable, defaulting to the
/// hardware concurrency. Always at least 1.
int max_threads();

/// Runs fn(i) for i in [0, n). Each index must write only to its own output
/// slot; results are then bit-identical for any thread count, including 1.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace sfm
