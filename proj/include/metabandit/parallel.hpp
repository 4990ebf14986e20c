#pragma once

#include <cstddef>
#include <functional>

namespace metabandit {

/// Worker count: METABANDIT_THREADS if set (>= 1), else hardware concurrency.
int worker_threads();

/// Runs body(i) for i in [0, count) on up to worker_threads() threads.
/// Indices are claimed from a shared counter, so callers must write results
/// only to slots owned by i. The first exception thrown by any body is
/// rethrown after all workers join. Calls made from inside a body run
/// serially on the calling worker, so nesting never multiplies threads.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace metabandit
