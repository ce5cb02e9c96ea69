#pragma once

#include <cstdint>
#include <functional>

namespace fkprop {

// Worker count: FKPROP_THREADS if set (>=1), else hardware concurrency.
int worker_count();

// Runs body(i) for i in [begin, end) on worker_count() threads using a static
// block partition. Bodies must only write to disjoint, index-owned slots;
// combined with per-index RNG streams and deterministic reduction this keeps
// results independent of the thread count.
void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t)>& body);

}  // namespace fkprop
