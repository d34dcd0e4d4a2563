#pragma once

#include <cstddef>
#include <functional>

namespace admissible {

/// Upper bound on worker threads for parallel_for. Defaults to the
/// ADMISSIBLE_ML_THREADS environment variable, else hardware concurrency.
std::size_t max_threads();
void set_max_threads(std::size_t n);

/// Runs fn(0..n-1) across at most max_threads() workers. Each index is a
/// self-contained task, so results never depend on scheduling. The first
/// exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace admissible
