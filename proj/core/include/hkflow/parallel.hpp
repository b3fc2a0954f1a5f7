#pragma once

#include <cstddef>
#include <functional>

namespace hkflow {

// Worker count for pointwise loops. Reductions never go through parallel_for,
// so results do not depend on this setting.
void set_num_threads(int k);
int num_threads();

// Calls fn(begin, end) on disjoint contiguous chunks covering [0, count).
void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace hkflow
