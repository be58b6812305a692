#pragma once

#include <functional>

namespace diffaudit {

// Runs fn(0..n-1) on up to `workers` threads. Tasks must be independent and
// write only to their own output slots; callers reduce results in index
// order afterwards, so the outcome does not depend on the worker count.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

int default_workers();

}  // namespace diffaudit
