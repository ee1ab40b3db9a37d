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

#ifndef MODELWARDEN_TRACE_TRACE_H_
#define MODELWARDEN_TRACE_TRACE_H_

// Parsing of multi-process strace output (`strace -f -o`) and of the
// per-syscall summary table printed by `strace -c`.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "modelwarden/common/errors.h"

namespace modelwarden::trace {

class MalformedLine : public ParseError {
 public:
  MalformedLine(std::size_t line_no, std::string_view line);
  std::size_t line_no() const { return line_no_; }

 private:
  std::size_t line_no_;
};

class MalformedSummary : public ParseError {
 public:
  using ParseError::ParseError;
};

class EmptyLog : public Error {
 public:
  EmptyLog() : Error("trace log has no events") {}
};

struct RawTraceEvent {
  std::int64_t pid = 0;
  std::string syscall;
  std::string args_text;
  // Text after "= ", e.g. "0", "-1 ENOENT (No such file or directory)", "?".
  // Empty when the call never returned within the log.
  std::string retval;
  bool resumed = false;

  bool operator==(const RawTraceEvent&) const = default;
};

struct ParseDiagnostics {
  std::size_t signal_lines = 0;
  std::size_t exit_lines = 0;
  std::size_t info_lines = 0;        // "strace: Process N attached" and similar
  std::size_t malformed_lines = 0;   // skipped in lenient mode
  std::size_t orphan_resumed = 0;    // resumption without a pending entry
  std::size_t unmatched_unfinished = 0;
};

struct TraceLog {
  std::vector<RawTraceEvent> events;
  // Pids in order of first appearance on any line.
  std::vector<std::int64_t> pids;
  ParseDiagnostics diagnostics;
};

struct SyscallSummary {
  std::map<std::string, std::uint64_t> counts;

  std::uint64_t total() const;
  bool operator==(const SyscallSummary& other) const {
    return counts == other.counts;
  }
};

struct ParseOptions {
  bool strict = false;
};

TraceLog parse_raw_trace(std::string_view text, ParseOptions options = {});
SyscallSummary parse_summary(std::string_view text);
SyscallSummary summarize(const TraceLog& log);

// Generalized process identities: the first pid seen is "P1", then "P2", ...
std::map<std::int64_t, std::string> normalize_pids(const TraceLog& log);

// Renders a summary as a `strace -c` style table (timing columns zeroed).
std::string format_summary(const SyscallSummary& summary);

// Renders events back into the `-f` line grammar (one completed call per line).
std::string format_raw_trace(const TraceLog& log);

bool is_syscall_name(std::string_view name);

}  // namespace modelwarden::trace

#endif  // MODELWARDEN_TRACE_TRACE_H_
