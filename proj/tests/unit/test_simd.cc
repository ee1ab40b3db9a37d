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

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "modelwarden/simd/kernels.h"

using namespace modelwarden;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d(0.0, 10.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Relative bound for reassociated sums of n terms.
double reduction_tolerance(std::size_t n, double magnitude) {
  return 4.0 * static_cast<double>(n + 1) * 1.1102230246251565e-16 * (magnitude + 1.0);
}

}  // namespace

TEST_CASE("scalar kernels against direct loops") {
  std::mt19937_64 rng(1);
  const auto a = random_vector(rng, 37);
  const auto b = random_vector(rng, 37);
  double dot = 0, dist = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    dist += (a[i] - b[i]) * (a[i] - b[i]);
  }
  CHECK(simd::scalar::dot(a.data(), b.data(), a.size()) == doctest::Approx(dot).epsilon(1e-12));
  CHECK(simd::scalar::squared_distance(a.data(), b.data(), a.size()) ==
        doctest::Approx(dist).epsilon(1e-12));
}

#if defined(MODELWARDEN_HAVE_AVX2_KERNELS)
TEST_CASE("avx2 kernels agree with scalar references") {
  if (!simd::supported(simd::Level::kAvx2)) {
    MESSAGE("AVX2 not available; skipped");
    return;
  }
  std::mt19937_64 rng(2);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 17u, 63u, 64u, 100u, 1031u}) {
    const auto a = random_vector(rng, n);
    const auto b = random_vector(rng, n);
    double mag_dot = 0, mag_dist = 0;
    for (std::size_t i = 0; i < n; ++i) {
      mag_dot += std::abs(a[i] * b[i]);
      mag_dist += (a[i] - b[i]) * (a[i] - b[i]);
    }
    CHECK(std::abs(simd::avx2::dot(a.data(), b.data(), n) -
                   simd::scalar::dot(a.data(), b.data(), n)) <= reduction_tolerance(n, mag_dot));
    CHECK(std::abs(simd::avx2::squared_distance(a.data(), b.data(), n) -
                   simd::scalar::squared_distance(a.data(), b.data(), n)) <=
          reduction_tolerance(n, mag_dist));

    // Elementwise kernels are bit-identical.
    auto d = random_vector(rng, n);
    for (auto& x : d) x = std::abs(x) + 0.5;
    auto v1 = a, v2 = a;
    simd::scalar::divide(v1.data(), d.data(), n);
    simd::avx2::divide(v2.data(), d.data(), n);
    CHECK(v1 == v2);
    auto y1 = b, y2 = b;
    simd::scalar::axpy(0.37, a.data(), y1.data(), n);
    simd::avx2::axpy(0.37, a.data(), y2.data(), n);
    CHECK(y1 == y2);
    simd::scalar::scale(y1.data(), -1.25, n);
    simd::avx2::scale(y2.data(), -1.25, n);
    CHECK(y1 == y2);
  }
}

TEST_CASE("dispatch honours set_level") {
  const simd::Level before = simd::active_level();
  std::vector<double> a = {1, 2, 3}, b = {4, 5, 6};
  simd::set_level(simd::Level::kScalar);
  CHECK(simd::active_level() == simd::Level::kScalar);
  CHECK(simd::dot(a, b) == 32.0);
  if (simd::supported(simd::Level::kAvx2)) {
    simd::set_level(simd::Level::kAvx2);
    CHECK(simd::dot(a, b) == 32.0);
  }
  simd::set_level(before);
  CHECK_THROWS(simd::dot(a, std::vector<double>{1.0}));
}
#endif
