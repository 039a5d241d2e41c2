// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace isac::num {

/// Worker thread cap: ISAC_THREADS if set and positive, else hardware concurrency.
std::size_t worker_threads();

/// Runs fn(i) for i in [0, n) on up to worker_threads() threads. Each index must
/// write only its own output slot; the first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace isac::num
