// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace dtsv {

// Runs fn(i) for i in [0, n) on `threads` workers (static interleaved
// assignment). After all workers finish, the exception thrown for the
// lowest index, if any, is rethrown.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

// Worker count from a request: 0 means hardware concurrency.
unsigned resolve_threads(unsigned requested);

}  // namespace dtsv
