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
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "modelwarden/common/io.h"
#include "modelwarden/features/features.h"

namespace fs = std::filesystem;
using namespace modelwarden;
using namespace modelwarden::features;
using trace::RawTraceEvent;
using trace::SyscallSummary;
using trace::TraceLog;

namespace {

const std::vector<std::string> kNames = {"read", "write", "openat", "close", "mmap",
                                         "futex", "execve", "clone", "connect", "brk"};

TraceLog random_log(std::mt19937_64& rng, std::size_t max_events = 60) {
  TraceLog log;
  std::uniform_int_distribution<std::size_t> len(0, max_events), name(0, kNames.size() - 1);
  std::uniform_int_distribution<int> pid(0, 3);
  const std::int64_t base = 100 + static_cast<std::int64_t>(rng() % 10000);
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) {
    RawTraceEvent e;
    e.pid = base + pid(rng) * 7;
    e.syscall = kNames[name(rng)];
    e.retval = "0";
    if (std::find(log.pids.begin(), log.pids.end(), e.pid) == log.pids.end()) {
      log.pids.push_back(e.pid);
    }
    log.events.push_back(e);
  }
  return log;
}

TraceLog log_of(const std::vector<std::pair<std::int64_t, std::string>>& events) {
  TraceLog log;
  for (const auto& [pid, name] : events) {
    log.events.push_back({pid, name, "", "0", false});
    if (std::find(log.pids.begin(), log.pids.end(), pid) == log.pids.end()) log.pids.push_back(pid);
  }
  return log;
}

// Sliding window over the name sequence, tuples compared as vectors.
std::map<std::vector<std::string>, int> window_counts(const TraceLog& log, std::size_t n) {
  std::map<std::vector<std::string>, int> out;
  for (std::size_t i = 0; i + n <= log.events.size(); ++i) {
    std::vector<std::string> w;
    for (std::size_t j = i; j < i + n; ++j) w.push_back(log.events[j].syscall);
    ++out[w];
  }
  return out;
}

std::vector<std::string> parse_seq_key(const std::string& key) {
  REQUIRE(key.rfind("seq::", 0) == 0);
  return split(key.substr(5), ':');
}

}  // namespace

TEST_CASE("builtin vocabulary") {
  const auto& v = SyscallVocabulary::builtin();
  CHECK(v.size() > 300);
  CHECK(v.names().front() == "read");
  CHECK(v.contains("execve"));
  CHECK(v.contains("openat"));
  CHECK_FALSE(v.contains("frobnicate"));
  CHECK(v.version() == "linux-5.15-x86_64");
  CHECK(v.hash() == SyscallVocabulary::load(fs::path(MODELWARDEN_DATA_DIR) / "syscalls_x86_64.txt").hash());
  CHECK(v.hash() != SyscallVocabulary::parse("read\nwrite\n").hash());
  CHECK_THROWS_AS(SyscallVocabulary::parse("read\nread\n"), ParseError);
  CHECK_THROWS_AS(SyscallVocabulary::parse("# nothing\n"), ParseError);
}

TEST_CASE("presence and frequency") {
  const auto& v = SyscallVocabulary::builtin();
  SyscallSummary s;
  s.counts = {{"read", 10}};
  CHECK(presence_features(s, v) == FeatureMap{{"pres::read", 1}});
  CHECK(presence_features({}, v).empty());
  s.counts = {{"read", 10}, {"write", 5}};
  CHECK(frequency_features(s, v) == FeatureMap{{"freq::read", 10}, {"freq::write", 5}});

  s.counts = {{"read", 1}, {"frobnicate", 3}};
  ExtractionDiagnostics diag;
  CHECK(frequency_features(s, v, &diag) == FeatureMap{{"freq::read", 1}});
  CHECK(diag.out_of_vocabulary == std::map<std::string, std::uint64_t>{{"frobnicate", 3}});

  const TraceLog fig4 = trace::parse_raw_trace(
      read_file_text(fs::path(MODELWARDEN_FIXTURES) / "trace" / "fig4.strace"));
  CHECK(presence_features(trace::summarize(fig4), v).at("pres::execve") == 1.0);
}

TEST_CASE("frequency equals a recount on random logs") {
  const auto& v = SyscallVocabulary::builtin();
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const TraceLog log = random_log(rng);
    std::map<std::string, double> recount;
    for (const auto& e : log.events) recount["freq::" + e.syscall] += 1;
    CHECK(frequency_features(trace::summarize(log), v) == FeatureMap(recount.begin(), recount.end()));
  }
}

TEST_CASE("n-gram features") {
  const TraceLog log = log_of({{1, "execve"}, {1, "read"}, {1, "write"}});
  CHECK(ngram_features(log, 2) == FeatureMap{{"seq::execve:read", 1}, {"seq::read:write", 1}});
  CHECK(ngram_features(log, 3) == FeatureMap{{"seq::execve:read:write", 1}});
  CHECK(ngram_features(log_of({{1, "read"}}), 2).empty());
  CHECK_THROWS(ngram_features(log, 1));
}

TEST_CASE("n-gram counts equal a sliding-window recount on random logs") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const TraceLog log = random_log(rng);
    for (std::size_t n = 2; n <= 4; ++n) {
      const auto expected = window_counts(log, n);
      const FeatureMap got = ngram_features(log, static_cast<int>(n));
      REQUIRE(got.size() == expected.size());
      double total = 0;
      for (const auto& [key, value] : got) {
        const auto it = expected.find(parse_seq_key(key));
        REQUIRE(it != expected.end());
        CHECK(value == it->second);
        total += value;
      }
      CHECK(total == static_cast<double>(log.events.size() >= n ? log.events.size() - n + 1 : 0));
    }
  }
}

TEST_CASE("process sequence features") {
  const TraceLog log = log_of({{4012, "close"}, {4013, "rt_sigprocmask"}});
  CHECK(process_sequence_features(log) == FeatureMap{{"proc::P1:close_P2:rt_sigprocmask", 1}});
  CHECK(process_sequence_features(log_of({{9, "read"}})).empty());
  CHECK_THROWS_AS(process_sequence_features(TraceLog{}), trace::EmptyLog);
}

TEST_CASE("process sequence counts equal a recount and ignore pid renumbering") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    TraceLog log = random_log(rng);
    if (log.events.empty()) continue;
    // Recount with labels assigned by an independent first-appearance scan.
    std::map<std::int64_t, int> label;
    for (const auto& e : log.events) label.emplace(e.pid, static_cast<int>(label.size()) + 1);
    std::map<std::string, double> expected;
    for (std::size_t i = 0; i + 1 < log.events.size(); ++i) {
      const auto& a = log.events[i];
      const auto& b = log.events[i + 1];
      expected["proc::P" + std::to_string(label[a.pid]) + ":" + a.syscall + "_P" +
               std::to_string(label[b.pid]) + ":" + b.syscall] += 1;
    }
    const FeatureMap got = process_sequence_features(log);
    CHECK(got == FeatureMap(expected.begin(), expected.end()));

    std::map<std::int64_t, std::int64_t> renumber;
    std::set<std::int64_t> used;
    for (auto pid : log.pids) {
      std::int64_t fresh;
      do {
        fresh = 1 + static_cast<std::int64_t>(rng() % 1000000);
      } while (!used.insert(fresh).second);
      renumber[pid] = fresh;
    }
    for (auto& e : log.events) e.pid = renumber.at(e.pid);
    for (auto& p : log.pids) p = renumber.at(p);
    CHECK(process_sequence_features(log) == got);
  }
}

TEST_CASE("feature set parsing and extraction") {
  const FeatureSet def = FeatureSet::parse("pres,freq");
  CHECK(def == FeatureSet{});
  CHECK(def.to_string() == "pres,freq");
  CHECK_FALSE(def.needs_log());
  const FeatureSet all = FeatureSet::parse("pres,freq,seq,procseq", 3);
  CHECK(all.needs_log());
  CHECK(all.ngram == 3);
  CHECK_THROWS_AS(FeatureSet::parse("pres,bogus"), BadFeatureSet);
  CHECK_THROWS_AS(FeatureSet::parse(""), BadFeatureSet);

  const auto& v = SyscallVocabulary::builtin();
  SampleInputs in;
  in.summary.counts = {{"read", 2}, {"bogus_call", 1}};
  ExtractionDiagnostics diag;
  const FeatureMap m = extract(in, def, v, &diag);
  CHECK(m == FeatureMap{{"pres::read", 1}, {"freq::read", 2}});
  CHECK(diag.out_of_vocabulary.at("bogus_call") == 1);
  CHECK_THROWS(extract(in, all, v));
}

TEST_CASE("default feature row depends only on the summary") {
  const auto& v = SyscallVocabulary::builtin();
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    TraceLog log = random_log(rng);
    SampleInputs a{trace::summarize(log), log, {}};
    std::shuffle(log.events.begin(), log.events.end(), rng);
    SampleInputs b{trace::summarize(log), log, {}};
    CHECK(extract(a, FeatureSet{}, v) == extract(b, FeatureSet{}, v));
  }
}

TEST_CASE("vectorize") {
  const std::vector<std::string> cols = {"freq::read", "freq::write"};
  const FeatureMatrix m = vectorize({{{"freq::read", 1}}, {{"freq::write", 2}}}, cols);
  CHECK(m.values == std::vector<double>{1, 0, 0, 2});
  CHECK(m.row_ids == std::vector<std::string>{"0", "1"});

  const FeatureMatrix d = vectorize({{{"freq::read", 1}, {"freq::open", 4}}}, cols, {"x"});
  CHECK(d.values == std::vector<double>{1, 0});
  CHECK(d.dropped_entries == 1);
}

TEST_CASE("vectorize row sums equal in-column map sums") {
  std::mt19937_64 rng(23);
  std::vector<std::string> universe;
  for (int i = 0; i < 30; ++i) universe.push_back("freq::k" + std::to_string(i));
  const std::vector<std::string> cols(universe.begin(), universe.begin() + 20);
  const std::set<std::string> colset(cols.begin(), cols.end());
  std::vector<FeatureMap> maps;
  for (int r = 0; r < 50; ++r) {
    FeatureMap m;
    for (int k = 0; k < 12; ++k) m[universe[rng() % universe.size()]] = static_cast<double>(rng() % 9);
    maps.push_back(m);
  }
  const FeatureMatrix x = vectorize(maps, cols);
  for (std::size_t r = 0; r < maps.size(); ++r) {
    double expected = 0, got = 0;
    for (const auto& [k, val] : maps[r]) {
      if (colset.count(k)) expected += val;
    }
    for (std::size_t c = 0; c < x.cols(); ++c) got += x.at(r, c);
    CHECK(got == expected);
  }
}

TEST_CASE("column freeze: test rows never add columns") {
  const auto& v = SyscallVocabulary::builtin();
  const FeatureSet set = FeatureSet::parse("pres,freq,seq");
  const std::vector<FeatureMap> train = {ngram_features(log_of({{1, "read"}, {1, "write"}}))};
  const auto cols = build_columns(set, v, train);
  CHECK(cols.size() == 2 * v.size() + 1);
  CHECK(std::count(cols.begin(), cols.end(), "seq::read:write") == 1);
  const FeatureMatrix test =
      vectorize({ngram_features(log_of({{1, "execve"}, {1, "connect"}, {1, "read"}}))}, cols);
  CHECK(test.cols() == cols.size());
  CHECK(test.dropped_entries == 2);
  const auto op_cols = build_columns(FeatureSet::parse("op"), v, {});
  CHECK(op_cols.size() == 68);
}

TEST_CASE("scaler") {
  SUBCASE("zero variance column is floored to 1") {
    const FeatureMatrix m = vectorize({{{"freq::a", 2}}, {{"freq::a", 2}}, {{"freq::a", 2}}},
                                      {"freq::a"});
    const ScalerState s = fit_scaler(m);
    CHECK(s.scale[0] == 1.0);
    CHECK(transform(s, m) == m);
  }
  SUBCASE("closed-form population std") {
    const FeatureMatrix m = vectorize({{}, {}, {{"freq::a", 4}}}, {"freq::a"});
    const ScalerState s = fit_scaler(m);
    // mean 4/3, deviations -4/3, -4/3, 8/3 -> variance (16+16+64)/27 = 32/9
    const double sd = std::sqrt(32.0 / 9.0);
    CHECK(s.scale[0] == doctest::Approx(sd).epsilon(1e-15));
    CHECK(s.scale[0] == doctest::Approx(1.8856180831641267));
    const FeatureMatrix t = transform(s, m);
    CHECK(t.values[0] == 0.0);
    CHECK(t.values[1] == 0.0);
    CHECK(t.values[2] == doctest::Approx(2.1213203435596424));
  }
  SUBCASE("presence columns are not scaled") {
    const FeatureMatrix m = vectorize({{{"pres::a", 1}}, {}}, {"pres::a"});
    CHECK(fit_scaler(m).scale[0] == 1.0);
  }
  CHECK_THROWS_AS(fit_scaler(FeatureMatrix{}), EmptyMatrix);
}

TEST_CASE("property: scaling keeps the zero pattern and column argmax") {
  std::mt19937_64 rng(29);
  std::uniform_int_distribution<int> val(0, 6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<FeatureMap> maps;
    for (int r = 0; r < 25; ++r) {
      FeatureMap m;
      for (int c = 0; c < 8; ++c) {
        const int x = val(rng);
        if (x > 3) m["freq::c" + std::to_string(c)] = x * 1.5;
        if (x == 6) m["pres::c" + std::to_string(c)] = 1;
      }
      maps.push_back(m);
    }
    std::vector<std::string> cols;
    for (int c = 0; c < 8; ++c) {
      cols.push_back("freq::c" + std::to_string(c));
      cols.push_back("pres::c" + std::to_string(c));
    }
    const FeatureMatrix m = vectorize(maps, cols);
    const ScalerState s = fit_scaler(m);
    const FeatureMatrix t = transform(s, m);
    for (std::size_t c = 0; c < m.cols(); ++c) {
      CHECK(s.scale[c] > 0);
      std::size_t am = 0, at = 0;
      for (std::size_t r = 0; r < m.rows(); ++r) {
        CHECK((m.at(r, c) == 0) == (t.at(r, c) == 0));
        if (m.at(r, c) > m.at(am, c)) am = r;
        if (t.at(r, c) > t.at(at, c)) at = r;
      }
      CHECK(am == at);
      if (cols[c].rfind("pres::", 0) == 0) CHECK(s.scale[c] == 1.0);
    }
  }
}

TEST_CASE("matrix persistence") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> d(0, 100);
  FeatureMatrix m;
  m.columns = {"freq::read", "seq::a:b", "proc::P1:x_P2:y"};
  m.row_ids = {"model,1", "m\"2", "m3"};
  for (int i = 0; i < 9; ++i) m.values.push_back(d(rng));
  CHECK(matrix_from_csv(matrix_to_csv(m)) == m);
  CHECK(matrix_from_binary(matrix_to_binary(m)) == m);
  CHECK(matrix_to_csv(m).substr(0, 7) == "row_id,");

  const fs::path dir = fs::temp_directory_path() / "mw_matrix_test";
  fs::create_directories(dir);
  save_matrix(dir / "m.csv", m);
  save_matrix(dir / "m.bin", m);
  CHECK(load_matrix(dir / "m.csv") == m);
  CHECK(load_matrix(dir / "m.bin") == m);
  fs::remove_all(dir);

  Bytes bad = matrix_to_binary(m);
  bad.resize(bad.size() - 3);
  CHECK_THROWS_AS(matrix_from_binary(bad), ParseError);
  CHECK_THROWS_AS(matrix_from_csv("a,b\n1,2\n"), ParseError);
  CHECK_THROWS_AS(matrix_from_csv("row_id,a\nx,oops\n"), ParseError);
}
