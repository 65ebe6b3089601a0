#pragma once

#include <cstddef>
#include <functional>

namespace umcmc {

/// Number of worker threads: UMCMC_THREADS when set, else machine parallelism.
std::size_t thread_budget();

/// Runs fn(i) for i in [0, n). Work is split across threads; fn must be safe
/// to run concurrently for distinct i. Callers wanting deterministic output
/// write into per-index slots and combine in index order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace umcmc
