// Copyright 2026 The ModelWarden Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MODELWARDEN_COMMON_PARALLEL_H_
#define MODELWARDEN_COMMON_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace modelwarden {

// Runs fn(0..n-1) on up to `jobs` threads (0 = hardware concurrency). Each
// index runs exactly once; results must be written to per-index slots. The
// first exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

std::size_t resolve_jobs(std::size_t jobs);

}  // namespace modelwarden

#endif  // MODELWARDEN_COMMON_PARALLEL_H_
