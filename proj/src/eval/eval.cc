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

#include "modelwarden/eval/eval.h"

#include <algorithm>

#include "modelwarden/common/io.h"

namespace modelwarden::eval {

LengthMismatch::LengthMismatch(std::size_t predictions, std::size_t labels)
    : Error(std::to_string(predictions) + " predictions for " + std::to_string(labels) +
            " labels") {}

namespace {

void count(Confusion& c, Label predicted, Label truth) {
  const bool p = predicted == Label::kMalicious;
  const bool t = truth == Label::kMalicious;
  if (p && t) {
    ++c.tp;
  } else if (p) {
    ++c.fp;
  } else if (t) {
    ++c.fn;
  } else {
    ++c.tn;
  }
}

}  // namespace

Confusion confusion(std::span<const Label> predictions, std::span<const Label> labels) {
  if (predictions.size() != labels.size()) throw LengthMismatch(predictions.size(), labels.size());
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) count(c, predictions[i], labels[i]);
  return c;
}

Confusion confusion(std::span<const Verdict> predictions, std::span<const Label> labels) {
  if (predictions.size() != labels.size()) throw LengthMismatch(predictions.size(), labels.size());
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) count(c, predictions[i].label, labels[i]);
  return c;
}

double Fraction::value() const {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string Fraction::str(int places) const {
  return format_ratio_half_even(den == 0 ? 0 : num, den == 0 ? 1 : den, places);
}

MetricReport metrics(const Confusion& c) {
  MetricReport r;
  r.precision = {c.tp, c.tp + c.fp};
  r.recall = {c.tp, c.tp + c.fn};
  r.f1 = {2 * c.tp, 2 * c.tp + c.fp + c.fn};
  r.accuracy = {c.tp + c.tn, c.total()};
  // With tp = 0 the harmonic mean is 0 even if the formula's denominator is not.
  if (c.tp == 0) r.f1 = {0, r.f1.den};
  r.degenerate = r.precision.den == 0 || r.recall.den == 0 || r.f1.den == 0 || r.accuracy.den == 0;
  return r;
}

bool is_injected_origin(std::string_view origin) { return origin.starts_with("injected"); }

std::vector<ComparisonRow> compare(const std::vector<DetectorRun>& detectors,
                                   const std::vector<EvalSample>& samples) {
  std::vector<ComparisonRow> rows;
  std::vector<Label> truth;
  for (const auto& s : samples) truth.push_back(s.truth);
  for (const auto& d : detectors) {
    ComparisonRow row;
    row.detector = d.name;
    try {
      std::vector<Label> predicted;
      predicted.reserve(samples.size());
      for (std::size_t i = 0; i < samples.size(); ++i) predicted.push_back(d.scorer(i).label);
      row.confusion = confusion(predicted, truth);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].truth != Label::kMalicious) continue;
        const bool hit = predicted[i] == Label::kMalicious;
        auto& [detected, total] = row.by_origin[samples[i].origin];
        ++total;
        detected += hit;
        (is_injected_origin(samples[i].origin) ? row.detected_injected : row.detected_real) += hit;
      }
    } catch (const std::exception& e) {
      row = ComparisonRow{};
      row.detector = d.name;
      row.error = e.what();
    }
    row.metrics = metrics(row.confusion);
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

// Detected count over origins ending in `source`.
std::uint64_t detected_from(const ComparisonRow& r, std::string_view source) {
  std::uint64_t n = 0;
  for (const auto& [origin, counts] : r.by_origin) {
    if (origin.size() >= source.size() && origin.compare(origin.size() - source.size(), source.size(), source) == 0) {
      n += counts.first;
    }
  }
  return n;
}

CsvRow row_fields(const ComparisonRow& r) {
  const auto& c = r.confusion;
  const auto& m = r.metrics;
  return {r.detector,
          std::to_string(c.fp),
          std::to_string(detected_from(r, "real")),
          std::to_string(detected_from(r, "malhug")),
          std::to_string(detected_from(r, "pypi")),
          std::to_string(c.tp),
          std::to_string(c.tn),
          std::to_string(c.fp),
          std::to_string(c.fn),
          m.precision.str(),
          m.recall.str(),
          m.f1.str()};
}

// Columns of the published comparison table: flagged benign, detected real,
// MalHug and PyPI samples, then the confusion counts and metrics.
const CsvRow kHeader = {"detector", "benign", "real", "malhug", "pypi",   "tp",
                        "tn",       "fp",     "fn",   "precision", "recall", "f1"};

}  // namespace

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::string out = join_csv_row(kHeader) + "\n";
  for (const auto& r : rows) out += join_csv_row(row_fields(r)) + "\n";
  return out;
}

std::string comparison_text(const std::vector<ComparisonRow>& rows) {
  std::vector<CsvRow> table{kHeader};
  for (const auto& r : rows) table.push_back(row_fields(r));
  std::vector<std::size_t> width(kHeader.size(), 0);
  for (const auto& t : table) {
    for (std::size_t c = 0; c < t.size(); ++c) width[c] = std::max(width[c], t[c].size());
  }
  std::string out;
  for (std::size_t i = 0; i < table.size(); ++i) {
    std::string line;
    for (std::size_t c = 0; c < table[i].size(); ++c) {
      const std::string& f = table[i][c];
      const std::string pad(width[c] - f.size(), ' ');
      line += c == 0 ? f + pad : "  " + pad + f;
    }
    out += line + "\n";
    if (i == 0) out += std::string(line.size(), '-') + "\n";
  }
  for (const auto& r : rows) {
    if (!r.error.empty()) out += r.detector + ": failed: " + r.error + "\n";
  }
  return out;
}

}  // namespace modelwarden::eval
