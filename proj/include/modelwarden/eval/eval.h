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

#ifndef MODELWARDEN_EVAL_EVAL_H_
#define MODELWARDEN_EVAL_EVAL_H_

// Confusion counting and metrics with Malicious as the positive class.
// Ratios are kept as exact fractions so that reports round half-to-even on
// the true value rather than on a binary approximation.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "modelwarden/common/errors.h"
#include "modelwarden/detectors/detectors.h"

namespace modelwarden::eval {

using detectors::Label;
using detectors::Verdict;

class LengthMismatch : public Error {
 public:
  LengthMismatch(std::size_t predictions, std::size_t labels);
};

struct Confusion {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::uint64_t total() const { return tp + tn + fp + fn; }
  bool operator==(const Confusion&) const = default;
};

Confusion confusion(std::span<const Verdict> predictions, std::span<const Label> labels);
Confusion confusion(std::span<const Label> predictions, std::span<const Label> labels);

struct Fraction {
  std::uint64_t num = 0;
  std::uint64_t den = 0;  // 0 means undefined; reported as 0
  double value() const;
  // Four decimal places, half-to-even.
  std::string str(int places = 4) const;
};

struct MetricReport {
  Fraction precision, recall, f1, accuracy;
  // Set when any denominator was zero.
  bool degenerate = false;
};

// f1 = 2 tp / (2 tp + fp + fn), which equals 2PR/(P+R) whenever P+R > 0.
MetricReport metrics(const Confusion& c);

struct EvalSample {
  std::string id;
  Label truth = Label::kBenign;
  // "benign", "real", "malhug", "injected-malhug", "injected-pypi", ...
  std::string origin;
};

bool is_injected_origin(std::string_view origin);

// Scores sample i; may throw, which marks the detector as failed.
using Scorer = std::function<Verdict(std::size_t)>;

struct DetectorRun {
  std::string name;
  Scorer scorer;
};

struct ComparisonRow {
  std::string detector;
  Confusion confusion;
  MetricReport metrics;
  std::uint64_t detected_real = 0;      // flagged malicious samples, non-injected
  std::uint64_t detected_injected = 0;  // flagged malicious samples, injected
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> by_origin;  // detected, total
  std::string error;                    // non-empty when the scorer failed
};

std::vector<ComparisonRow> compare(const std::vector<DetectorRun>& detectors,
                                   const std::vector<EvalSample>& samples);

// detector,benign,real,malhug,pypi,tp,tn,fp,fn,precision,recall,f1 where benign
// counts flagged benign samples and real/malhug/pypi count detections by
// origin suffix.
std::string comparison_csv(const std::vector<ComparisonRow>& rows);
std::string comparison_text(const std::vector<ComparisonRow>& rows);

}  // namespace modelwarden::eval

#endif  // MODELWARDEN_EVAL_EVAL_H_
