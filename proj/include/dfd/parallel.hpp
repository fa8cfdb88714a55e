#pragma once

#include <cstddef>
#include <functional>

namespace dfd {

/// Worker cap: DFD_THREADS if set (>= 1), otherwise hardware concurrency.
std::size_t worker_count();

/// Runs body(i) for i in [0, n). Iterations must write disjoint outputs; the
/// result is then independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace dfd
