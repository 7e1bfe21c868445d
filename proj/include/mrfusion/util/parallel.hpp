#pragma once

#include <cstddef>
#include <functional>

namespace mrfusion::util {

/// Process-wide worker cap (the CLI `--threads` flag). 0 means hardware
/// concurrency.
void set_max_threads(std::size_t n);
std::size_t max_threads();

/// Runs body(i) for i in [0, n) on up to max_threads() workers, each taking
/// a contiguous range. Output must be written to per-index slots so the
/// result does not depend on the worker count. The first exception thrown
/// by a worker is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace mrfusion::util
