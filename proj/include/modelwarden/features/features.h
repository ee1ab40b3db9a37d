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

#ifndef MODELWARDEN_FEATURES_FEATURES_H_
#define MODELWARDEN_FEATURES_FEATURES_H_

// Feature extraction from syscall summaries, trace logs and pickle programs,
// plus the dense matrix and the std-only scaler the detectors consume.
//
// Key grammar:
//   pres::<syscall>                    1 when the syscall occurs
//   freq::<syscall>                    occurrence count
//   seq::<s1>:<s2>[:<s3>...]           n-gram count over the global event order
//   proc::<Pi>:<s1>_<Pj>:<s2>          2-gram count over (process label, syscall)
//   op::<MNEMONIC>                     pickle opcode count

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "modelwarden/common/errors.h"
#include "modelwarden/common/feature_map.h"
#include "modelwarden/common/io.h"
#include "modelwarden/trace/trace.h"

namespace modelwarden::features {

class EmptyMatrix : public Error {
 public:
  EmptyMatrix() : Error("feature matrix has no rows") {}
};

class BadFeatureSet : public ParseError {
 public:
  using ParseError::ParseError;
};

class SyscallVocabulary {
 public:
  SyscallVocabulary() = default;
  SyscallVocabulary(std::vector<std::string> names, std::string version);

  // The x86-64 table compiled into the library.
  static const SyscallVocabulary& builtin();
  // One name per line; "#" comments; an optional "# version: X" line.
  static SyscallVocabulary parse(std::string_view text);
  static SyscallVocabulary load(const std::filesystem::path& path);

  const std::vector<std::string>& names() const { return names_; }
  const std::string& version() const { return version_; }
  std::size_t size() const { return names_.size(); }
  bool contains(std::string_view name) const;
  // Stable hash over version and names, recorded in models and manifests.
  std::string hash() const;

 private:
  std::vector<std::string> names_;
  std::string version_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct ExtractionDiagnostics {
  // Syscall names outside the vocabulary, with their counts.
  std::map<std::string, std::uint64_t> out_of_vocabulary;
};

FeatureMap presence_features(const trace::SyscallSummary& summary,
                             const SyscallVocabulary& vocab,
                             ExtractionDiagnostics* diag = nullptr);
FeatureMap frequency_features(const trace::SyscallSummary& summary,
                              const SyscallVocabulary& vocab,
                              ExtractionDiagnostics* diag = nullptr);
// Throws Error when n < 2.
FeatureMap ngram_features(const trace::TraceLog& log, int n = 2);
// Throws trace::EmptyLog on an empty log.
FeatureMap process_sequence_features(const trace::TraceLog& log);

// Which feature families make up a row. Parsed from "pres,freq,seq,procseq,op".
struct FeatureSet {
  bool presence = true;
  bool frequency = true;
  bool sequence = false;
  bool process_sequence = false;
  bool opcodes = false;
  int ngram = 2;

  static FeatureSet parse(std::string_view spec, int ngram = 2);
  std::string to_string() const;
  // Families that need the ordered log rather than the summary alone.
  bool needs_log() const { return sequence || process_sequence; }
  bool operator==(const FeatureSet&) const = default;
};

// Inputs for one sample; log and opcode counts are optional per family.
struct SampleInputs {
  trace::SyscallSummary summary;
  std::optional<trace::TraceLog> log;
  FeatureMap opcode_features;
};

FeatureMap extract(const SampleInputs& inputs, const FeatureSet& set,
                   const SyscallVocabulary& vocab,
                   ExtractionDiagnostics* diag = nullptr);

// Column keys for a feature set. Vocabulary-backed families (pres, freq, op)
// always contribute their full fixed vocabulary; seq and proc columns are the
// sorted union of keys seen in `training`.
std::vector<std::string> build_columns(const FeatureSet& set, const SyscallVocabulary& vocab,
                                       const std::vector<FeatureMap>& training);

struct FeatureMatrix {
  std::vector<std::string> columns;
  std::vector<std::string> row_ids;
  std::vector<double> values;  // row-major, rows() x cols()
  std::size_t dropped_entries = 0;

  std::size_t rows() const { return row_ids.size(); }
  std::size_t cols() const { return columns.size(); }
  const double* row(std::size_t r) const { return values.data() + r * cols(); }
  double* row(std::size_t r) { return values.data() + r * cols(); }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
  std::vector<double> row_vector(std::size_t r) const {
    return {row(r), row(r) + cols()};
  }
  FeatureMatrix select_rows(const std::vector<std::size_t>& rows) const;
  bool operator==(const FeatureMatrix&) const = default;
};

// Keys outside `columns` are dropped and tallied in dropped_entries.
FeatureMatrix vectorize(const std::vector<FeatureMap>& maps, const std::vector<std::string>& columns,
                        std::vector<std::string> row_ids = {});

// Divides each column by its population standard deviation over the
// training rows. Presence columns keep scale 1.
struct ScalerState {
  std::vector<std::string> columns;
  std::vector<double> scale;

  static constexpr double kEpsilon = 1e-12;
  bool operator==(const ScalerState&) const = default;
};

ScalerState fit_scaler(const FeatureMatrix& train);
FeatureMatrix transform(const ScalerState& scaler, const FeatureMatrix& m);
void transform_row(const ScalerState& scaler, std::span<double> row);

// CSV: header "row_id,<columns...>", one row per sample.
std::string matrix_to_csv(const FeatureMatrix& m);
FeatureMatrix matrix_from_csv(std::string_view text);
// Columnar binary: "MWFM" magic, version, then column names and one
// little-endian double block per column.
Bytes matrix_to_binary(const FeatureMatrix& m);
FeatureMatrix matrix_from_binary(std::span<const std::uint8_t> data);

void save_matrix(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix load_matrix(const std::filesystem::path& path);

}  // namespace modelwarden::features

#endif  // MODELWARDEN_FEATURES_FEATURES_H_
