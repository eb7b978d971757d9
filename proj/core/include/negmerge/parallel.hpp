// Copyright 2026 The NegMerge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NEGMERGE_PARALLEL_HPP_
#define NEGMERGE_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace negmerge {

// Execution settings for element-wise kernels. Work is cut into a fixed
// schedule of units that does not depend on `threads`, so results are
// value-identical for any thread count.
struct Exec {
  unsigned threads = 1;
};

// NEGMERGE_THREADS if set to a positive integer, otherwise the hardware
// concurrency (at least 1).
unsigned default_threads();

// Elements per work unit for chunked element-wise kernels.
inline constexpr std::size_t kChunkElements = std::size_t{1} << 15;

// Runs fn(0..units-1) over up to `threads` workers. If any call throws, the
// exception of the lowest-numbered failing unit is rethrown.
void parallel_for(std::size_t units, unsigned threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace negmerge

#endif  // NEGMERGE_PARALLEL_HPP_
