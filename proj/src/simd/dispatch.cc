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

#include <atomic>
#include <cstdlib>
#include <string>

#include "modelwarden/common/errors.h"
#include "modelwarden/simd/kernels.h"

namespace modelwarden::simd {

namespace {

Level detect_best() {
#if defined(MODELWARDEN_HAVE_AVX2_KERNELS)
  if (supported(Level::kAvx2)) return Level::kAvx2;
#endif
  return Level::kScalar;
}

Level initial_level() {
  const char* env = std::getenv("MODELWARDEN_SIMD");
  if (env != nullptr) {
    const std::string requested(env);
    if (requested == "scalar") return Level::kScalar;
    if (requested == "avx2" && supported(Level::kAvx2)) return Level::kAvx2;
  }
  return detect_best();
}

std::atomic<Level>& current() {
  static std::atomic<Level> level{initial_level()};
  return level;
}

}  // namespace

bool supported(Level level) {
  switch (level) {
    case Level::kScalar:
      return true;
    case Level::kAvx2:
#if defined(MODELWARDEN_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Level active_level() { return current().load(std::memory_order_relaxed); }

void set_level(Level level) {
  if (!supported(level)) {
    throw Error("SIMD level not supported on this CPU: " +
                std::string(level_name(level)));
  }
  current().store(level, std::memory_order_relaxed);
}

std::string_view level_name(Level level) {
  return level == Level::kAvx2 ? "avx2" : "scalar";
}

#if defined(MODELWARDEN_HAVE_AVX2_KERNELS)
#define MW_DISPATCH(fn, ...)                                  \
  (active_level() == Level::kAvx2 ? avx2::fn(__VA_ARGS__)     \
                                  : scalar::fn(__VA_ARGS__))
#else
#define MW_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

namespace {
void require_same_size(std::size_t a, std::size_t b) {
  if (a != b) throw Error("simd: operand size mismatch");
}
}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size());
  return MW_DISPATCH(dot, a.data(), b.data(), a.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size());
  return MW_DISPATCH(squared_distance, a.data(), b.data(), a.size());
}

void divide(std::span<double> values, std::span<const double> divisors) {
  require_same_size(values.size(), divisors.size());
  MW_DISPATCH(divide, values.data(), divisors.data(), values.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_same_size(x.size(), y.size());
  MW_DISPATCH(axpy, alpha, x.data(), y.data(), x.size());
}

void scale(std::span<double> y, double factor) {
  MW_DISPATCH(scale, y.data(), factor, y.size());
}

#undef MW_DISPATCH

}  // namespace modelwarden::simd
