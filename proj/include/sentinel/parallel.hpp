#pragma once

#include <cstddef>
#include <functional>

namespace sentinel {

/// Worker count to use when the caller asks for `requested` threads:
/// at least 1, capped by the STALL_SENTINEL_WORKERS environment variable
/// when it holds a positive integer.
int effective_workers(int requested);

/// Runs body(begin, end) over a static partition of [0, n) into at most
/// `workers` contiguous chunks. Chunks are disjoint, so bodies that only write
/// to their own range produce identical results for any worker count.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace sentinel
