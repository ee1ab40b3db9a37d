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
#include <limits>
#include <random>

#include "doctest.h"
#include "modelwarden/common/io.h"

using namespace modelwarden;

TEST_CASE("format_ratio_half_even") {
  CHECK(format_ratio_half_even(2011, 2012, 4) == "0.9995");
  CHECK(format_ratio_half_even(1, 8, 2) == "0.12");   // 0.125 -> even
  CHECK(format_ratio_half_even(3, 8, 2) == "0.38");   // 0.375 -> even
  CHECK(format_ratio_half_even(5, 8, 1) == "0.6");    // 0.625 -> 0.6
  CHECK(format_ratio_half_even(1, 1, 4) == "1.0000");
  CHECK(format_ratio_half_even(0, 7, 4) == "0.0000");
  CHECK(format_ratio_half_even(99995, 100000, 4) == "1.0000");
}

TEST_CASE("base64 and double blocks") {
  const Bytes data = {0, 1, 2, 250, 251, 252, 253};
  for (std::size_t n = 0; n <= data.size(); ++n) {
    const Bytes part(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(n));
    CHECK(base64_decode(base64_encode(part)) == part);
  }
  CHECK(base64_encode(Bytes{'M', 'a', 'n'}) == "TWFu");
  const std::vector<double> v = {0.0, -1.5, 1e-300, std::numeric_limits<double>::max(),
                                 std::nextafter(1.0, 2.0)};
  CHECK(decode_doubles(encode_doubles(v)) == v);
  CHECK_THROWS(base64_decode("@@@@"));
}

TEST_CASE("format_double round trips") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d(0, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double x = d(rng);
    CHECK(std::stod(format_double(x)) == x);
  }
}

TEST_CASE("csv") {
  const auto rows = parse_csv("a,b\n\"x,1\",\"he said \"\"hi\"\"\"\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[1][0] == "x,1");
  CHECK(rows[1][1] == "he said \"hi\"");
  CHECK(join_csv_row(rows[1]) == "\"x,1\",\"he said \"\"hi\"\"\"");
  CHECK(csv_escape("plain") == "plain");
}

TEST_CASE("seeds and hashes") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(derive_seed(42, "cell") == derive_seed(42, "cell"));
  CHECK(derive_seed(42, "cell") != derive_seed(43, "cell"));
  CHECK(derive_seed(42, "a") != derive_seed(42, "b"));
  CHECK(hex64(255) == "00000000000000ff");
}
