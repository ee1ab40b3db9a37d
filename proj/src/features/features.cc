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

#include "modelwarden/features/features.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <set>

#include "modelwarden/pickle/opcodes.h"
#include "modelwarden/simd/kernels.h"

namespace modelwarden::features {

namespace detail {
extern const char kBuiltinSyscallTable[];
}

namespace {

constexpr std::string_view kPresence = "pres::";
constexpr std::string_view kFrequency = "freq::";
constexpr std::string_view kSequence = "seq::";
constexpr std::string_view kProcess = "proc::";
constexpr std::string_view kOpcode = "op::";

template <typename Fn>
FeatureMap vocab_features(const trace::SyscallSummary& summary, const SyscallVocabulary& vocab,
                          ExtractionDiagnostics* diag, Fn&& emit) {
  FeatureMap out;
  for (const auto& [name, count] : summary.counts) {
    if (!vocab.contains(name)) {
      if (diag != nullptr) diag->out_of_vocabulary[name] += count;
      continue;
    }
    if (count > 0) emit(out, name, count);
  }
  return out;
}

}  // namespace

SyscallVocabulary::SyscallVocabulary(std::vector<std::string> names, std::string version)
    : names_(std::move(names)), version_(std::move(version)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (!trace::is_syscall_name(names_[i])) {
      throw ParseError("bad syscall name in vocabulary: '" + names_[i] + "'");
    }
    if (!index_.emplace(names_[i], i).second) {
      throw ParseError("duplicate syscall name in vocabulary: " + names_[i]);
    }
  }
}

const SyscallVocabulary& SyscallVocabulary::builtin() {
  static const SyscallVocabulary vocab = parse(detail::kBuiltinSyscallTable);
  return vocab;
}

SyscallVocabulary SyscallVocabulary::parse(std::string_view text) {
  std::vector<std::string> names;
  std::string version = "unversioned";
  for (const auto& raw : split(text, '\n')) {
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string_view body = trim(line.substr(1));
      if (body.starts_with("version:")) version = std::string(trim(body.substr(8)));
      continue;
    }
    names.emplace_back(line);
  }
  if (names.empty()) throw ParseError("syscall vocabulary is empty");
  return SyscallVocabulary(std::move(names), std::move(version));
}

SyscallVocabulary SyscallVocabulary::load(const std::filesystem::path& path) {
  return parse(read_file_text(path));
}

bool SyscallVocabulary::contains(std::string_view name) const {
  return index_.find(std::string(name)) != index_.end();
}

std::string SyscallVocabulary::hash() const {
  std::uint64_t h = fnv1a64(version_);
  for (const auto& n : names_) h = fnv1a64(n + "\n", h);
  return hex64(h);
}

FeatureMap presence_features(const trace::SyscallSummary& summary, const SyscallVocabulary& vocab,
                             ExtractionDiagnostics* diag) {
  return vocab_features(summary, vocab, diag, [](FeatureMap& out, const std::string& name,
                                                 std::uint64_t) {
    out[std::string(kPresence) + name] = 1.0;
  });
}

FeatureMap frequency_features(const trace::SyscallSummary& summary, const SyscallVocabulary& vocab,
                              ExtractionDiagnostics* diag) {
  return vocab_features(summary, vocab, diag, [](FeatureMap& out, const std::string& name,
                                                 std::uint64_t count) {
    out[std::string(kFrequency) + name] = static_cast<double>(count);
  });
}

FeatureMap ngram_features(const trace::TraceLog& log, int n) {
  if (n < 2) throw Error("n-gram order must be at least 2");
  FeatureMap out;
  const auto& ev = log.events;
  const auto width = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + width <= ev.size(); ++i) {
    std::string key(kSequence);
    for (std::size_t j = 0; j < width; ++j) {
      if (j > 0) key += ':';
      key += ev[i + j].syscall;
    }
    out[key] += 1.0;
  }
  return out;
}

FeatureMap process_sequence_features(const trace::TraceLog& log) {
  const auto labels = trace::normalize_pids(log);
  FeatureMap out;
  const auto& ev = log.events;
  for (std::size_t i = 0; i + 1 < ev.size(); ++i) {
    const std::string key = std::string(kProcess) + labels.at(ev[i].pid) + ":" + ev[i].syscall +
                            "_" + labels.at(ev[i + 1].pid) + ":" + ev[i + 1].syscall;
    out[key] += 1.0;
  }
  return out;
}

FeatureSet FeatureSet::parse(std::string_view spec, int ngram) {
  FeatureSet set;
  set.presence = set.frequency = false;
  set.ngram = ngram;
  if (ngram < 2) throw BadFeatureSet("n-gram order must be at least 2");
  for (const auto& raw : split(spec, ',')) {
    const std::string_view f = trim(raw);
    if (f == "pres" || f == "presence") {
      set.presence = true;
    } else if (f == "freq" || f == "frequency") {
      set.frequency = true;
    } else if (f == "seq") {
      set.sequence = true;
    } else if (f == "procseq" || f == "proc") {
      set.process_sequence = true;
    } else if (f == "op" || f == "static") {
      set.opcodes = true;
    } else {
      throw BadFeatureSet("unknown feature family '" + std::string(f) + "'");
    }
  }
  if (!(set.presence || set.frequency || set.sequence || set.process_sequence || set.opcodes)) {
    throw BadFeatureSet("empty feature set");
  }
  return set;
}

std::string FeatureSet::to_string() const {
  std::vector<std::string> parts;
  if (presence) parts.emplace_back("pres");
  if (frequency) parts.emplace_back("freq");
  if (sequence) parts.emplace_back("seq");
  if (process_sequence) parts.emplace_back("procseq");
  if (opcodes) parts.emplace_back("op");
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : ",") + p;
  return out;
}

FeatureMap extract(const SampleInputs& inputs, const FeatureSet& set,
                   const SyscallVocabulary& vocab, ExtractionDiagnostics* diag) {
  FeatureMap out;
  auto merge = [&out](const FeatureMap& m) { out.insert(m.begin(), m.end()); };
  if (set.presence) merge(presence_features(inputs.summary, vocab, diag));
  // The OOV tally is taken once even when both families are on.
  if (set.frequency) merge(frequency_features(inputs.summary, vocab, set.presence ? nullptr : diag));
  if (set.needs_log()) {
    if (!inputs.log) throw Error("feature set '" + set.to_string() + "' needs an ordered trace log");
    if (set.sequence) merge(ngram_features(*inputs.log, set.ngram));
    if (set.process_sequence && !inputs.log->events.empty()) {
      merge(process_sequence_features(*inputs.log));
    }
  }
  if (set.opcodes) merge(inputs.opcode_features);
  return out;
}

std::vector<std::string> build_columns(const FeatureSet& set, const SyscallVocabulary& vocab,
                                       const std::vector<FeatureMap>& training) {
  std::vector<std::string> cols;
  if (set.presence) {
    for (const auto& n : vocab.names()) cols.push_back(std::string(kPresence) + n);
  }
  if (set.frequency) {
    for (const auto& n : vocab.names()) cols.push_back(std::string(kFrequency) + n);
  }
  std::set<std::string> learned;
  for (const auto& m : training) {
    for (const auto& [key, value] : m) {
      if ((set.sequence && key.starts_with(kSequence)) ||
          (set.process_sequence && key.starts_with(kProcess))) {
        learned.insert(key);
      }
    }
  }
  cols.insert(cols.end(), learned.begin(), learned.end());
  if (set.opcodes) {
    for (const auto& info : pickle::opcode_table()) {
      cols.push_back(std::string(kOpcode) + std::string(info.name));
    }
  }
  return cols;
}

FeatureMatrix FeatureMatrix::select_rows(const std::vector<std::size_t>& rows) const {
  FeatureMatrix out;
  out.columns = columns;
  out.values.reserve(rows.size() * cols());
  for (std::size_t r : rows) {
    out.row_ids.push_back(row_ids.at(r));
    out.values.insert(out.values.end(), row(r), row(r) + cols());
  }
  return out;
}

FeatureMatrix vectorize(const std::vector<FeatureMap>& maps, const std::vector<std::string>& columns,
                        std::vector<std::string> row_ids) {
  if (row_ids.empty()) {
    for (std::size_t i = 0; i < maps.size(); ++i) row_ids.push_back(std::to_string(i));
  }
  if (row_ids.size() != maps.size()) throw Error("row id count does not match map count");
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (!index.emplace(columns[c], c).second) throw Error("duplicate column " + columns[c]);
  }
  FeatureMatrix m;
  m.columns = columns;
  m.row_ids = std::move(row_ids);
  m.values.assign(maps.size() * columns.size(), 0.0);
  for (std::size_t r = 0; r < maps.size(); ++r) {
    for (const auto& [key, value] : maps[r]) {
      const auto it = index.find(key);
      if (it == index.end()) {
        ++m.dropped_entries;
        continue;
      }
      m.values[r * columns.size() + it->second] = value;
    }
  }
  return m;
}

ScalerState fit_scaler(const FeatureMatrix& train) {
  if (train.rows() == 0) throw EmptyMatrix();
  ScalerState s;
  s.columns = train.columns;
  s.scale.assign(train.cols(), 1.0);
  const auto n = static_cast<double>(train.rows());
  for (std::size_t c = 0; c < train.cols(); ++c) {
    if (train.columns[c].starts_with(kPresence)) continue;
    double mean = 0.0;
    for (std::size_t r = 0; r < train.rows(); ++r) mean += train.at(r, c);
    mean /= n;
    double ss = 0.0;
    for (std::size_t r = 0; r < train.rows(); ++r) {
      const double d = train.at(r, c) - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / n);
    s.scale[c] = sd < ScalerState::kEpsilon ? 1.0 : sd;
  }
  return s;
}

void transform_row(const ScalerState& scaler, std::span<double> row) {
  if (row.size() != scaler.scale.size()) throw Error("row width does not match scaler");
  simd::divide(row, scaler.scale);
}

FeatureMatrix transform(const ScalerState& scaler, const FeatureMatrix& m) {
  if (m.columns != scaler.columns) throw Error("matrix columns do not match scaler columns");
  FeatureMatrix out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    transform_row(scaler, std::span<double>(out.row(r), out.cols()));
  }
  return out;
}

std::string matrix_to_csv(const FeatureMatrix& m) {
  CsvRow header{"row_id"};
  header.insert(header.end(), m.columns.begin(), m.columns.end());
  std::string out = join_csv_row(header) + "\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out += csv_escape(m.row_ids[r]);
    for (std::size_t c = 0; c < m.cols(); ++c) {
      out += ',';
      out += format_double(m.at(r, c));
    }
    out += '\n';
  }
  return out;
}

FeatureMatrix matrix_from_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows[0].empty() || rows[0][0] != "row_id") {
    throw ParseError("feature CSV must start with a row_id header");
  }
  FeatureMatrix m;
  m.columns.assign(rows[0].begin() + 1, rows[0].end());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() == 1 && rows[r][0].empty()) continue;
    if (rows[r].size() != rows[0].size()) {
      throw ParseError("feature CSV row " + std::to_string(r + 1) + " has " +
                       std::to_string(rows[r].size()) + " fields, expected " +
                       std::to_string(rows[0].size()));
    }
    m.row_ids.push_back(rows[r][0]);
    for (std::size_t c = 1; c < rows[r].size(); ++c) {
      try {
        std::size_t used = 0;
        m.values.push_back(std::stod(rows[r][c], &used));
        if (used != rows[r][c].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError("feature CSV row " + std::to_string(r + 1) + ": bad number '" +
                         rows[r][c] + "'");
      }
    }
  }
  return m;
}

namespace {

constexpr char kMagic[4] = {'M', 'W', 'F', 'M'};
constexpr std::uint32_t kBinaryVersion = 1;

void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_string(Bytes& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class BinaryReader {
 public:
  explicit BinaryReader(std::span<const std::uint8_t> data) : data_(data) {}
  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{data_[pos_++]} << (8 * i);
    return v;
  }
  std::string string() {
    const auto n = static_cast<std::size_t>(uint(4));
    need(n);
    std::string s(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  double real() { return std::bit_cast<double>(uint(8)); }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw ParseError("feature matrix binary is truncated");
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace

Bytes matrix_to_binary(const FeatureMatrix& m) {
  Bytes out(kMagic, kMagic + 4);
  put_u32(out, kBinaryVersion);
  put_u64(out, m.rows());
  put_u64(out, m.cols());
  for (const auto& id : m.row_ids) put_string(out, id);
  for (std::size_t c = 0; c < m.cols(); ++c) {
    put_string(out, m.columns[c]);
    for (std::size_t r = 0; r < m.rows(); ++r) put_u64(out, std::bit_cast<std::uint64_t>(m.at(r, c)));
  }
  return out;
}

FeatureMatrix matrix_from_binary(std::span<const std::uint8_t> data) {
  if (data.size() < 4 || std::memcmp(data.data(), kMagic, 4) != 0) {
    throw ParseError("not a feature matrix binary (bad magic)");
  }
  BinaryReader in(data.subspan(4));
  const auto version = in.uint(4);
  if (version != kBinaryVersion) {
    throw ParseError("unsupported feature matrix version " + std::to_string(version));
  }
  const auto rows = static_cast<std::size_t>(in.uint(8));
  const auto cols = static_cast<std::size_t>(in.uint(8));
  if (rows > data.size() || cols > data.size()) throw ParseError("feature matrix binary is truncated");
  FeatureMatrix m;
  for (std::size_t r = 0; r < rows; ++r) m.row_ids.push_back(in.string());
  m.values.assign(rows * cols, 0.0);
  for (std::size_t c = 0; c < cols; ++c) {
    m.columns.push_back(in.string());
    for (std::size_t r = 0; r < rows; ++r) m.values[r * cols + c] = in.real();
  }
  if (!in.at_end()) throw ParseError("trailing bytes after feature matrix");
  return m;
}

void save_matrix(const std::filesystem::path& path, const FeatureMatrix& m) {
  if (path.extension() == ".csv") {
    write_file_text(path, matrix_to_csv(m));
  } else {
    write_file_bytes(path, matrix_to_binary(m));
  }
}

FeatureMatrix load_matrix(const std::filesystem::path& path) {
  const Bytes data = read_file_bytes(path);
  if (data.size() >= 4 && std::memcmp(data.data(), kMagic, 4) == 0) return matrix_from_binary(data);
  return matrix_from_csv(std::string_view(reinterpret_cast<const char*>(data.data()), data.size()));
}

}  // namespace modelwarden::features
