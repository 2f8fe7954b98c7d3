#pragma once

#include <cstddef>
#include <functional>

namespace gic {

// Sets the worker count for parallel_for. 0 picks hardware_concurrency.
void set_thread_count(int n);
int thread_count();

// Runs fn over [0,n) split into at most thread_count() contiguous chunks.
// Every index is processed by exactly one chunk and chunk-internal order is
// ascending, so results do not depend on the worker count as long as fn
// writes only to locations owned by its index range.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

} // namespace gic
