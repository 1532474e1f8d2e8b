#pragma once

#include <cstddef>
#include <functional>

namespace slowfast {

// Process-wide cap on worker threads; 0 selects the hardware concurrency.
void set_max_threads(int n);
int max_threads();

// Runs fn(i) for i in [0, n). Work items must write only to their own slot;
// exceptions are rethrown for the lowest failing index. Nested calls run serially.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace slowfast
