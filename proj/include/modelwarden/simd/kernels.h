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

#ifndef MODELWARDEN_SIMD_KERNELS_H_
#define MODELWARDEN_SIMD_KERNELS_H_

// Dense double-precision inner loops used by feature scaling and the
// detectors. Each kernel has a scalar reference in `scalar::` and, on x86-64,
// an AVX2+FMA variant in `avx2::`. The public entry points dispatch to the
// level chosen at startup (best supported, overridable with the
// MODELWARDEN_SIMD environment variable: "scalar" or "avx2").
//
// Elementwise kernels (divide, axpy, scale) are bit-identical across levels.
// Reductions (dot, squared_distance) differ only by summation order.

#include <cstddef>
#include <span>
#include <string_view>

namespace modelwarden::simd {

enum class Level { kScalar, kAvx2 };

bool supported(Level level);
Level active_level();
// Switches the dispatch target; throws modelwarden::Error when unsupported.
void set_level(Level level);
std::string_view level_name(Level level);

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
// values[i] /= divisors[i]
void divide(std::span<double> values, std::span<const double> divisors);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
// y *= factor
void scale(std::span<double> y, double factor);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void divide(double* values, const double* divisors, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double* y, double factor, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define MODELWARDEN_HAVE_AVX2_KERNELS 1
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void divide(double* values, const double* divisors, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double* y, double factor, std::size_t n);
}  // namespace avx2
#endif

}  // namespace modelwarden::simd

#endif  // MODELWARDEN_SIMD_KERNELS_H_
