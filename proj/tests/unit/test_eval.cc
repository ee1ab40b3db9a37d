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

#include <algorithm>
#include <random>

#include "doctest.h"
#include "modelwarden/common/io.h"
#include "modelwarden/eval/eval.h"

using namespace modelwarden;
using namespace modelwarden::eval;

namespace {

constexpr Label B = Label::kBenign;
constexpr Label M = Label::kMalicious;

struct PaperRow {
  const char* detector;
  Confusion counts;
  double precision, recall, f1;
};

// Overall-performance rows of the published baseline comparison. The printed
// values are sometimes truncated rather than rounded, so rows are compared to
// within one unit in the fourth place.
const PaperRow kPaperRows[] = {
    {"PickleScan", {1067, 2025, 0, 958}, 1.0, 0.5269, 0.6902},
    {"ModelScan", {1067, 2025, 0, 958}, 1.0, 0.5269, 0.6902},
    {"Fickling", {2025, 0, 2025, 0}, 0.5, 1.0, 0.6667},
    {"ModelTracer", {1760, 2025, 0, 265}, 1.0, 0.8691, 0.9299},
    {"Llama-3.1", {2010, 688, 1337, 15}, 0.6005, 0.9926, 0.7483},
    {"GPT-5.2", {1804, 2013, 12, 221}, 0.9933, 0.8909, 0.9393},
    {"default", {2011, 2024, 1, 14}, 0.9995, 0.9931, 0.9963},
};

}  // namespace

TEST_CASE("confusion basics") {
  const std::vector<Label> truth{B, M, M, B};
  CHECK(confusion(truth, truth) == Confusion{2, 2, 0, 0});
  const std::vector<Label> all_benign(5, B), all_mal(5, M);
  CHECK(confusion(all_mal, all_benign).fp == 5);
  CHECK_THROWS_AS(confusion(all_mal, truth), LengthMismatch);
}

TEST_CASE("confusion matches a recount and metrics are order invariant") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Label> p(50), t(50);
    std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < 50; ++i) {
      p[i] = rng() % 2 ? M : B;
      t[i] = rng() % 2 ? M : B;
      if (p[i] == M && t[i] == M) ++tp;
      if (p[i] == B && t[i] == B) ++tn;
      if (p[i] == M && t[i] == B) ++fp;
      if (p[i] == B && t[i] == M) ++fn;
    }
    const Confusion c = confusion(p, t);
    CHECK(c == Confusion{tp, tn, fp, fn});
    CHECK(c.total() == 50);
    std::vector<std::size_t> order(50);
    for (std::size_t i = 0; i < 50; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Label> p2, t2;
    for (auto i : order) {
      p2.push_back(p[i]);
      t2.push_back(t[i]);
    }
    CHECK(confusion(p2, t2) == c);
  }
}

TEST_CASE("published rows") {
  const MetricReport ours = metrics({2011, 2024, 1, 14});
  CHECK(ours.precision.str() == "0.9995");
  CHECK(ours.recall.str() == "0.9931");
  CHECK(ours.f1.str() == "0.9963");
  const MetricReport scan = metrics({1067, 2025, 0, 958});
  CHECK(scan.precision.str() == "1.0000");
  CHECK(scan.recall.str() == "0.5269");
  CHECK(scan.f1.str() == "0.6902");
  for (const auto& row : kPaperRows) {
    CAPTURE(row.detector);
    const MetricReport m = metrics(row.counts);
    CHECK(std::abs(std::stod(m.precision.str()) - row.precision) <= 1e-4 + 1e-12);
    CHECK(std::abs(std::stod(m.recall.str()) - row.recall) <= 1e-4 + 1e-12);
    CHECK(std::abs(std::stod(m.f1.str()) - row.f1) <= 1e-4 + 1e-12);
    CHECK_FALSE(m.degenerate);
  }
}

TEST_CASE("f1 formula and degenerate cases") {
  const MetricReport zero = metrics({});
  CHECK(zero.degenerate);
  CHECK(zero.f1.value() == 0.0);
  CHECK(zero.precision.str() == "0.0000");
  for (std::uint64_t tp : {0, 1, 7})
    for (std::uint64_t fp : {0, 2})
      for (std::uint64_t fn : {0, 3}) {
        const MetricReport m = metrics({tp, 5, fp, fn});
        const double p = m.precision.value(), r = m.recall.value();
        const double expect = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
        CHECK(m.f1.value() == doctest::Approx(expect).epsilon(1e-12));
        if (fp == 0 && tp > 0) CHECK(m.precision.value() == 1.0);
        if (fn == 0 && tp > 0) CHECK(m.recall.value() == 1.0);
      }
}

TEST_CASE("compare table") {
  const std::vector<EvalSample> samples{{"b1", B, "benign"},
                                        {"b2", B, "benign"},
                                        {"m1", M, "real"},
                                        {"m2", M, "injected-malhug"},
                                        {"m3", M, "injected-pypi"}};
  auto oracle = [&](std::size_t i) { return detectors::Verdict{samples[i].truth, 0.0}; };
  // Only catches the real sample, as a blacklist would when injected
  // payloads avoid it.
  auto partial = [&](std::size_t i) {
    return detectors::Verdict{samples[i].origin == "real" ? M : B, 0.0};
  };
  auto broken = [](std::size_t) -> detectors::Verdict { throw Error("no trace"); };
  const auto rows = compare({{"perfect", oracle}, {"blacklist", partial}, {"broken", broken}}, samples);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].metrics.f1.value() == 1.0);
  CHECK(rows[0].detected_real == 1);
  CHECK(rows[0].detected_injected == 2);
  CHECK(rows[1].metrics.recall.value() < 1.0);
  CHECK(rows[1].by_origin.at("injected-pypi") == std::pair<std::uint64_t, std::uint64_t>{0, 1});
  CHECK(rows[2].error == "no trace");

  const std::string golden =
      "detector,benign,real,malhug,pypi,tp,tn,fp,fn,precision,recall,f1\n"
      "perfect,0,1,1,1,3,2,0,0,1.0000,1.0000,1.0000\n"
      "blacklist,0,1,0,0,1,2,0,2,1.0000,0.3333,0.5000\n"
      "broken,0,0,0,0,0,0,0,0,0.0000,0.0000,0.0000\n";
  CHECK(comparison_csv(rows) == golden);
  const std::string text = comparison_text(rows);
  CHECK(text.find("broken: failed: no trace") != std::string::npos);
  CHECK(text.find("\nblacklist       0     1       0     0   1   2   0   2     1.0000  0.3333  0.5000\n") !=
        std::string::npos);
}
