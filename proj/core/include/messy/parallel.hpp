#pragma once

#include <cstddef>
#include <functional>

namespace messy {

/// Worker count: MESSY_THREADS if set (>= 1), otherwise hardware concurrency.
std::size_t thread_count();

/// Runs body(i) for i in [0, n). Each index runs exactly once; callers write
/// results into per-index slots so reductions stay ordered.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  std::size_t max_threads = 0);

}  // namespace messy
