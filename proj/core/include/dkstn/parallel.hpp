#pragma once

#include <cstddef>
#include <functional>

namespace dkstn {

/// Worker count: DKSTN_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

/// Runs body(begin, end) over disjoint contiguous chunks of [0, n). Bodies must
/// write only to locations owned by their index range; any reduction is the
/// caller's job and must not depend on chunking.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace dkstn
