#pragma once

#include <cstddef>
#include <functional>

namespace macroreal {

// Thread count from an explicit request, else MACROREAL_THREADS, else 1.
unsigned resolve_threads(unsigned requested);

// Runs body(i) for i in [0, n) over up to `threads` workers. Work items are
// claimed dynamically; callers write results into per-index slots so output
// never depends on scheduling. The first exception is rethrown on the caller.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace macroreal
