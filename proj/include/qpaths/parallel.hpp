#pragma once

#include <cstddef>
#include <functional>

namespace qpaths {

/// Worker count used by parallel_for; 0 selects hardware concurrency.
void set_num_threads(unsigned n);
unsigned num_threads();

/// Calls fn(i) for i in [0, n) using contiguous blocks per thread. fn must
/// not touch shared mutable state other than its own output slot.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace qpaths
