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
#include <filesystem>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "modelwarden/common/io.h"
#include "modelwarden/trace/trace.h"

namespace fs = std::filesystem;
using namespace modelwarden;
using namespace modelwarden::trace;

namespace {

const fs::path kTraces = fs::path(MODELWARDEN_FIXTURES) / "trace";

std::string fixture(const std::string& name) { return read_file_text(kTraces / name); }

// Per-pid line sequences; interleaving them arbitrarily must not change what
// is parsed, since unfinished/resumed pairs are matched per pid.
std::vector<std::vector<std::string>> random_processes(std::mt19937_64& rng) {
  static const std::vector<std::string> names = {"read", "write", "openat", "close", "mmap",
                                                 "futex", "wait4", "execve", "connect"};
  std::uniform_int_distribution<int> nproc(1, 4), nlines(1, 12), pick(0, 8), coin(0, 3);
  std::vector<std::vector<std::string>> procs(static_cast<std::size_t>(nproc(rng)));
  int pid = 1000 + static_cast<int>(rng() % 5000);
  for (auto& lines : procs) {
    pid += 1 + static_cast<int>(rng() % 7);
    const int n = nlines(rng);
    for (int i = 0; i < n; ++i) {
      const std::string& s = names[static_cast<std::size_t>(pick(rng))];
      const std::string p = std::to_string(pid);
      if (coin(rng) == 0) {
        lines.push_back(p + " " + s + "(3, \"a(b\", 5 <unfinished ...>");
        lines.push_back(p + " <... " + s + " resumed>, 0) = 0");
      } else {
        lines.push_back(p + " " + s + "(1, [2, 3]) = 0");
      }
      if (coin(rng) == 1) lines.push_back(p + " --- SIGCHLD {si_signo=SIGCHLD} ---");
    }
    lines.push_back(std::to_string(pid) + " +++ exited with 0 +++");
  }
  return procs;
}

std::string interleave(const std::vector<std::vector<std::string>>& procs,
                       std::mt19937_64& rng) {
  std::vector<std::size_t> order;
  for (std::size_t p = 0; p < procs.size(); ++p) {
    order.insert(order.end(), procs[p].size(), p);
  }
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> next(procs.size(), 0);
  std::string out;
  for (std::size_t p : order) out += procs[p][next[p]++] + "\n";
  return out;
}

}  // namespace

TEST_CASE("single completed call") {
  const TraceLog log = parse_raw_trace(
      "22928 execve(\"/usr/bin/cat\", [\"cat\", \"/home/sandbox/.aws/secrets\"], ...) = 0");
  REQUIRE(log.events.size() == 1);
  CHECK(log.events[0].pid == 22928);
  CHECK(log.events[0].syscall == "execve");
  CHECK(log.events[0].retval == "0");
  CHECK_FALSE(log.events[0].resumed);
}

TEST_CASE("empty input") {
  const TraceLog log = parse_raw_trace("");
  CHECK(log.events.empty());
  CHECK(log.pids.empty());
  CHECK(summarize(log).counts.empty());
  CHECK_THROWS_AS(normalize_pids(log), EmptyLog);
}

TEST_CASE("Fig. 4 snippet") {
  const TraceLog log = parse_raw_trace(fixture("fig4.strace"));
  // execve is merged with its resumption; vfork resumes an entry outside the
  // snippet and is kept as a standalone event.
  REQUIRE(log.events.size() == 3);
  CHECK(log.events[0].syscall == "execve");
  CHECK(log.events[0].resumed);
  CHECK(log.events[0].retval == "0");
  CHECK(log.events[1].syscall == "vfork");
  CHECK(log.events[1].retval == "22928");
  CHECK(log.diagnostics.orphan_resumed == 1);

  const SyscallSummary s = summarize(log);
  CHECK(s.counts.at("execve") >= 1);
  CHECK(s.counts.at("rt_sigprocmask") >= 1);

  const auto labels = normalize_pids(log);
  CHECK(labels.at(22928) == "P1");
  CHECK(labels.at(22927) == "P2");
}

TEST_CASE("multi-process fixture, counted by hand") {
  const TraceLog log = parse_raw_trace(fixture("load_multiproc.strace"));
  // 23 lines: 2 exit lines, 1 signal line, one unfinished/resumed pair.
  CHECK(log.events.size() == 19);
  CHECK(log.diagnostics.exit_lines == 2);
  CHECK(log.diagnostics.signal_lines == 1);
  CHECK(log.diagnostics.malformed_lines == 0);
  const auto execs = std::count_if(log.events.begin(), log.events.end(),
                                   [](const RawTraceEvent& e) { return e.syscall == "execve"; });
  CHECK(execs == 2);
  const auto wait = std::find_if(log.events.begin(), log.events.end(),
                                 [](const RawTraceEvent& e) { return e.syscall == "wait4"; });
  REQUIRE(wait != log.events.end());
  CHECK(wait->resumed);
  CHECK(wait->retval == "4013");
  // The merged event keeps the position of its entry line.
  CHECK(wait - log.events.begin() == 9);
  CHECK(log.pids == std::vector<std::int64_t>{4012, 4013});

  CHECK(summarize(log) == parse_summary(fixture("load_multiproc.summary")));
}

TEST_CASE("unfinished without resumption counts as entered") {
  const TraceLog log = parse_raw_trace("7 read(0,  <unfinished ...>\n7 +++ killed by SIGKILL +++\n");
  REQUIRE(log.events.size() == 1);
  CHECK(log.events[0].retval.empty());
  CHECK(log.diagnostics.unmatched_unfinished == 1);
}

TEST_CASE("prefix and timestamp variants") {
  const TraceLog log = parse_raw_trace(
      "[pid  311] 12:00:01.123456 openat(AT_FDCWD, \"x\", O_RDONLY) = -1 ENOENT (No such file)\n"
      "close(3) = 0\n"
      "312 1700000000.5 getpid() = 312\n");
  REQUIRE(log.events.size() == 3);
  CHECK(log.events[0].pid == 311);
  CHECK(log.events[0].retval == "-1 ENOENT (No such file)");
  CHECK(log.events[1].pid == 0);
  CHECK(log.events[2].syscall == "getpid");
}

TEST_CASE("strict and lenient modes") {
  const std::string text = "1 read(0, \"\", 1) = 0\nthis is not a trace line\n1 close(0) = 0\n";
  const TraceLog lenient = parse_raw_trace(text);
  CHECK(lenient.events.size() == 2);
  CHECK(lenient.diagnostics.malformed_lines == 1);
  try {
    parse_raw_trace(text, {.strict = true});
    FAIL("expected MalformedLine");
  } catch (const MalformedLine& e) {
    CHECK(e.line_no() == 2);
  }
}

TEST_CASE("parse_summary") {
  const SyscallSummary s = parse_summary(fixture("three_rows.summary"));
  CHECK(s.counts == std::map<std::string, std::uint64_t>{{"read", 10}, {"write", 5}, {"execve", 1}});
  CHECK_THROWS_AS(parse_summary(fixture("total_only.summary")), MalformedSummary);
  CHECK_THROWS_AS(parse_summary(""), MalformedSummary);
  // The errors column may be blank or filled; calls is read by column.
  const SyscallSummary t = parse_summary(fixture("load_multiproc.summary"));
  CHECK(t.counts.at("openat") == 3);
  CHECK(t.total() == 19);
}

TEST_CASE("format_summary round trips through parse_summary") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    SyscallSummary s;
    for (const char* name : {"read", "write", "mmap", "execve", "rt_sigaction"}) {
      if (rng() % 3 != 0) s.counts[name] = 1 + rng() % 100000;
    }
    if (s.counts.empty()) s.counts["read"] = 1;
    CHECK(parse_summary(format_summary(s)) == s);
  }
}

TEST_CASE("summarize counts") {
  const TraceLog log = parse_raw_trace("1 read() = 0\n1 read() = 0\n1 execve() = 0\n");
  CHECK(summarize(log).counts == std::map<std::string, std::uint64_t>{{"read", 2}, {"execve", 1}});
}

TEST_CASE("normalize_pids follows first appearance") {
  const TraceLog log = parse_raw_trace("4012 read() = 0\n4013 read() = 0\n4012 close(1) = 0\n");
  const auto labels = normalize_pids(log);
  CHECK(labels.size() == 2);
  CHECK(labels.at(4012) == "P1");
  CHECK(labels.at(4013) == "P2");
}

TEST_CASE("property: interleaving other pids' lines does not change the counts") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const auto procs = random_processes(rng);
    std::size_t expected = 0;
    for (const auto& lines : procs) {
      for (const auto& l : lines) {
        if (l.find("resumed>") == std::string::npos && l.find("---") == std::string::npos &&
            l.find("+++") == std::string::npos) {
          ++expected;
        }
      }
    }
    const TraceLog a = parse_raw_trace(interleave(procs, rng), {.strict = true});
    const TraceLog b = parse_raw_trace(interleave(procs, rng), {.strict = true});
    CHECK(a.events.size() == expected);
    CHECK(summarize(a) == summarize(b));
    CHECK(a.diagnostics.orphan_resumed == 0);
    CHECK(a.diagnostics.unmatched_unfinished == 0);
    CHECK(std::all_of(a.events.begin(), a.events.end(),
                      [](const RawTraceEvent& e) { return !e.retval.empty(); }));
  }
}

TEST_CASE("property: pid labels survive order-preserving renumbering") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const auto procs = random_processes(rng);
    const std::string text = interleave(procs, rng);
    const TraceLog original = parse_raw_trace(text);
    // Injective renumbering: random distinct new pids.
    std::map<std::int64_t, std::int64_t> renumber;
    std::set<std::int64_t> used;
    for (auto pid : original.pids) {
      std::int64_t fresh;
      do {
        fresh = 2 + static_cast<std::int64_t>(rng() % 4000000);
      } while (!used.insert(fresh).second);
      renumber[pid] = fresh;
    }
    TraceLog relabeled_log = original;
    for (auto& e : relabeled_log.events) e.pid = renumber.at(e.pid);
    const TraceLog reparsed = parse_raw_trace(format_raw_trace(relabeled_log));
    const auto la = normalize_pids(original);
    const auto lb = normalize_pids(reparsed);
    REQUIRE(original.events.size() == reparsed.events.size());
    for (std::size_t i = 0; i < original.events.size(); ++i) {
      CHECK(la.at(original.events[i].pid) == lb.at(reparsed.events[i].pid));
    }
  }
}
