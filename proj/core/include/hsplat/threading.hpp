#pragma once

#include <cstdint>
#include <functional>

namespace hsplat {

/// Caps the worker pool used by parallel_for. 0 restores the hardware default.
void set_thread_count(int n);
int thread_count();

/// Runs fn over contiguous chunks of [begin, end). Chunk boundaries depend
/// only on the range, not on the pool size, and callers must keep chunk
/// writes disjoint; under those rules results are identical at any thread
/// count. Not reentrant.
void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

} // namespace hsplat
