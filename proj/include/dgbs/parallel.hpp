// Copyright 2026 The dgbs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace dgbs {

/// Worker count from the DGBS_WORKERS environment variable (default 1).
unsigned worker_count();

/// Runs body(i) for i in [0, n) over worker_count() threads. Every index is
/// visited exactly once; callers write results by index so the output does
/// not depend on the number of workers.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// SplitMix64 step; derives independent seeds for per-chunk substreams.
std::uint64_t splitmix64(std::uint64_t x);

/// Uniform double in [0, 1) from 53 high bits of a 64-bit draw.
inline double to_unit(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

}  // namespace dgbs
