#pragma once

#include <cstddef>
#include <functional>

namespace finsler {

/// Threads used by the data-parallel node loops; n ≤ 0 restores the default.
void set_worker_count(int n);
int worker_count();

/// Runs fn(i) for every i in [0, n) with a static schedule. If any call
/// throws, the exception from the smallest index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace finsler
