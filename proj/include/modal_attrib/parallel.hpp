#pragma once

#include <cstddef>
#include <functional>

namespace modal_attrib {

// Worker count: MODAL_ATTRIB_THREADS if set and positive, else hardware
// concurrency (at least 1).
std::size_t default_threads();

// Runs body(begin, end) over contiguous blocks of [0, n). Blocks are disjoint
// and each is processed by exactly one thread, so writes to per-index slots
// are race-free and results do not depend on the thread count.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace modal_attrib
