// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace canonlift {

/// Worker count from CANONLIFT_WORKERS, else hardware concurrency (>= 1).
int worker_count();

/// Runs task(0) .. task(n - 1) on up to worker_count() threads. Tasks must
/// write disjoint outputs; the first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task);

}  // namespace canonlift
