#pragma once

#include <cstddef>
#include <functional>

namespace fopsim {

// Number of worker threads used by parallel_for. 0 selects the hardware
// concurrency. The setting is process wide.
void set_thread_count(unsigned threads);
unsigned thread_count();

// Runs body(i) for i in [0, n) with a static contiguous partition. Bodies must
// only write to slots owned by their own index; no reduction happens here, so
// results are identical for any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace fopsim
