#pragma once

#include <cstdint>
#include <functional>

namespace mntp {

// Worker count for embarrassingly parallel inference work, taken from the
// MNTP_THREADS environment variable. Defaults to 1. Training is always
// single-threaded; parallel callers must key their RNG streams per item so
// results do not depend on this value.
int thread_count();

// Runs fn(i) for i in [0, n), split across thread_count() workers. Each
// worker handles a contiguous chunk; with one worker this is a plain loop.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

}  // namespace mntp
