#pragma once

#include <functional>

namespace freenoise {

/// Worker cap for parallel regions. Defaults to 1 (serial, bitwise
/// deterministic); FREENOISE_THREADS seeds the initial value.
int max_threads();
void set_max_threads(int n);

/// Runs fn(i) for i in [0, n). With max_threads() > 1 the range is split
/// into contiguous chunks across std::thread workers; iterations must write
/// disjoint outputs. The result is identical to the serial order because no
/// iteration depends on another.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace freenoise
