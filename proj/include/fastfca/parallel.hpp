// parallel.hpp -- frequency-parallel driver helper.

#pragma once

#include <functional>

namespace fastfca {

// Runs fn(k) for every k in [0, count).  workers <= 1 executes inline on the
// calling thread; otherwise indices are handed out atomically to a small
// thread crew.  Callers write only to disjoint per-index slots, so results
// are bit-identical for any worker count.  The first exception thrown by a
// worker is rethrown on the calling thread.
void parallel_for(int count, int workers, const std::function<void(int)>& fn);

// Hardware concurrency with a floor of 1.
int default_workers();

}  // namespace fastfca
