#ifndef GREENCOD_PARALLEL_H_
#define GREENCOD_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace greencod {

// Number of hardware threads, at least 1.
int hardware_threads();

// Runs fn(i) for i in [0, count) on up to `threads` workers. Work is split
// into contiguous static chunks, so any result that only depends on
// per-index output slots is independent of the worker count. Exceptions
// thrown by fn are rethrown on the calling thread (first one wins).
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace greencod

#endif  // GREENCOD_PARALLEL_H_
