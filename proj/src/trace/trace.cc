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

#include "modelwarden/trace/trace.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <unordered_map>
#include <utility>

#include "modelwarden/common/io.h"

namespace modelwarden::trace {

MalformedLine::MalformedLine(std::size_t line_no, std::string_view line)
    : ParseError("malformed trace line " + std::to_string(line_no) + ": " +
                 std::string(line.substr(0, 120))),
      line_no_(line_no) {}

std::uint64_t SyscallSummary::total() const {
  std::uint64_t sum = 0;
  for (const auto& [name, count] : counts) sum += count;
  return sum;
}

bool is_syscall_name(std::string_view name) {
  if (name.empty()) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

namespace {

constexpr std::string_view kUnfinished = "<unfinished ...>";
constexpr std::string_view kResumedPrefix = "<... ";
constexpr std::string_view kResumedSuffix = " resumed>";

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool parse_int(std::string_view text, std::int64_t& out) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::string_view skip_spaces(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

// Finds the ')' closing an argument list that is already `depth` levels deep.
// Respects double-quoted strings with backslash escapes.
std::size_t find_closing_paren(std::string_view s, int depth) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_string = true;
        break;
      case '(':
      case '[':
      case '{':
        ++depth;
        break;
      case ')':
        if (--depth == 0) return i;
        break;
      case ']':
      case '}':
        --depth;
        break;
      default:
        break;
    }
  }
  return std::string_view::npos;
}

// Parses "= <ret>" after the closing paren. Returns false if absent.
bool parse_retval(std::string_view rest, std::string& retval) {
  rest = skip_spaces(rest);
  if (rest.empty() || rest.front() != '=') return false;
  rest.remove_prefix(1);
  retval = std::string(trim(rest));
  return true;
}

enum class LineKind {
  kBlank,
  kCall,
  kUnfinished,
  kResumed,
  kResumedUnfinished,
  kSignal,
  kExit,
  kInfo,
  kMalformed
};

struct ParsedLine {
  LineKind kind = LineKind::kMalformed;
  std::int64_t pid = 0;
  std::string syscall;
  std::string args;
  std::string retval;
};

ParsedLine classify(std::string_view line) {
  ParsedLine out;
  line = trim(line);
  if (line.empty()) {
    out.kind = LineKind::kBlank;
    return out;
  }
  if (line.starts_with("strace:") || line.starts_with("System call usage")) {
    out.kind = LineKind::kInfo;
    return out;
  }
  // Optional "[pid  N] " or "N " prefix.
  if (line.starts_with("[pid")) {
    const auto close = line.find(']');
    if (close == std::string_view::npos) return out;
    if (!parse_int(trim(line.substr(4, close - 4)), out.pid)) return out;
    line = skip_spaces(line.substr(close + 1));
  } else if (is_digit(line.front())) {
    std::size_t i = 0;
    while (i < line.size() && is_digit(line[i])) ++i;
    if (i < line.size() && (line[i] == ' ' || line[i] == '\t')) {
      parse_int(line.substr(0, i), out.pid);
      line = skip_spaces(line.substr(i));
    }
  }
  // Optional timestamps (-t, -tt, -ttt, -r); syscall names never start with a digit.
  while (!line.empty() && is_digit(line.front())) {
    const auto sp = line.find_first_of(" \t");
    if (sp == std::string_view::npos) return out;
    line = skip_spaces(line.substr(sp));
  }
  if (line.starts_with("---")) {
    out.kind = LineKind::kSignal;
    return out;
  }
  if (line.starts_with("+++")) {
    out.kind = LineKind::kExit;
    return out;
  }
  if (line.starts_with(kResumedPrefix)) {
    const auto end = line.find(kResumedSuffix);
    if (end == std::string_view::npos) return out;
    const auto name = line.substr(kResumedPrefix.size(), end - kResumedPrefix.size());
    if (!is_syscall_name(name)) return out;
    out.syscall = std::string(name);
    std::string_view rest = line.substr(end + kResumedSuffix.size());
    if (trim(rest).ends_with(kUnfinished)) {
      out.kind = LineKind::kResumedUnfinished;
      return out;
    }
    const auto close = find_closing_paren(rest, 1);
    if (close == std::string_view::npos) return out;
    out.args = std::string(trim(rest.substr(0, close)));
    if (!parse_retval(rest.substr(close + 1), out.retval)) return out;
    out.kind = LineKind::kResumed;
    return out;
  }
  const auto open = line.find('(');
  if (open == std::string_view::npos || open == 0) return out;
  const auto name = line.substr(0, open);
  if (!is_syscall_name(name)) return out;
  out.syscall = std::string(name);
  std::string_view rest = line.substr(open + 1);
  if (rest.ends_with(kUnfinished)) {
    rest.remove_suffix(kUnfinished.size());
    out.args = std::string(trim(rest));
    out.kind = LineKind::kUnfinished;
    return out;
  }
  const auto close = find_closing_paren(rest, 1);
  if (close == std::string_view::npos) return out;
  out.args = std::string(rest.substr(0, close));
  if (!parse_retval(rest.substr(close + 1), out.retval)) return out;
  out.kind = LineKind::kCall;
  return out;
}

}  // namespace

TraceLog parse_raw_trace(std::string_view text, ParseOptions options) {
  TraceLog log;
  std::unordered_map<std::int64_t, std::size_t> pending;  // pid -> event index
  std::unordered_map<std::int64_t, bool> seen;

  auto note_pid = [&](std::int64_t pid) {
    if (seen.emplace(pid, true).second) log.pids.push_back(pid);
  };

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    ++line_no;

    ParsedLine parsed = classify(line);
    switch (parsed.kind) {
      case LineKind::kBlank:
        break;
      case LineKind::kSignal:
        ++log.diagnostics.signal_lines;
        break;
      case LineKind::kExit:
        ++log.diagnostics.exit_lines;
        break;
      case LineKind::kInfo:
      case LineKind::kResumedUnfinished:
        ++log.diagnostics.info_lines;
        break;
      case LineKind::kMalformed:
        if (options.strict) throw MalformedLine(line_no, line);
        ++log.diagnostics.malformed_lines;
        break;
      case LineKind::kCall:
        note_pid(parsed.pid);
        log.events.push_back({parsed.pid, std::move(parsed.syscall),
                              std::move(parsed.args), std::move(parsed.retval),
                              false});
        break;
      case LineKind::kUnfinished: {
        note_pid(parsed.pid);
        // A pid blocks in at most one call; an earlier pending entry that was
        // never resumed stays in the log as an entered call.
        if (pending.contains(parsed.pid)) ++log.diagnostics.unmatched_unfinished;
        pending[parsed.pid] = log.events.size();
        log.events.push_back({parsed.pid, std::move(parsed.syscall),
                              std::move(parsed.args), {}, false});
        break;
      }
      case LineKind::kResumed: {
        note_pid(parsed.pid);
        auto it = pending.find(parsed.pid);
        if (it != pending.end() && log.events[it->second].syscall == parsed.syscall) {
          RawTraceEvent& ev = log.events[it->second];
          if (!parsed.args.empty()) {
            if (!ev.args_text.empty()) ev.args_text += ' ';
            ev.args_text += parsed.args;
          }
          ev.retval = std::move(parsed.retval);
          ev.resumed = true;
          pending.erase(it);
        } else {
          ++log.diagnostics.orphan_resumed;
          log.events.push_back({parsed.pid, std::move(parsed.syscall),
                                std::move(parsed.args), std::move(parsed.retval),
                                true});
        }
        break;
      }
    }
    if (nl == text.size()) break;
  }
  log.diagnostics.unmatched_unfinished += pending.size();
  return log;
}

SyscallSummary summarize(const TraceLog& log) {
  SyscallSummary summary;
  for (const auto& ev : log.events) ++summary.counts[ev.syscall];
  return summary;
}

std::map<std::int64_t, std::string> normalize_pids(const TraceLog& log) {
  if (log.events.empty() || log.pids.empty()) throw EmptyLog();
  std::map<std::int64_t, std::string> labels;
  for (std::size_t i = 0; i < log.pids.size(); ++i) {
    labels.emplace(log.pids[i], "P" + std::to_string(i + 1));
  }
  return labels;
}

namespace {

struct Span {
  std::size_t begin;
  std::size_t end;  // exclusive; npos for "to end of line"
};

std::vector<Span> dash_spans(std::string_view line) {
  std::vector<Span> spans;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    if (i >= line.size()) break;
    const std::size_t b = i;
    while (i < line.size() && line[i] == '-') ++i;
    spans.push_back({b, i});
  }
  if (!spans.empty()) spans.back().end = std::string_view::npos;
  return spans;
}

bool is_separator(std::string_view line) {
  line = trim(line);
  return line.size() >= 3 && line.find_first_not_of("- ") == std::string_view::npos;
}

std::string_view field(std::string_view line, Span span) {
  if (span.begin >= line.size()) return {};
  // Right-aligned numbers may start before the dash group; widen to the
  // previous space boundary.
  std::size_t b = span.begin;
  while (b > 0 && line[b - 1] != ' ') --b;
  const std::size_t e = span.end == std::string_view::npos
                            ? line.size()
                            : std::min(line.size(), span.end);
  return trim(line.substr(b, e - b));
}

}  // namespace

SyscallSummary parse_summary(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start <= text.size();) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == text.size()) break;
    start = nl + 1;
  }

  SyscallSummary summary;
  bool any_row = false;
  std::size_t calls_col = std::string_view::npos;
  std::size_t name_col = std::string_view::npos;
  std::size_t header_calls_pos = std::string_view::npos;
  std::vector<Span> spans;

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (line.find("calls") != std::string_view::npos &&
        line.find("syscall") != std::string_view::npos) {
      header_calls_pos = line.find("calls");
      spans.clear();
      calls_col = name_col = std::string_view::npos;
      continue;
    }
    if (is_separator(line)) {
      if (header_calls_pos != std::string_view::npos && spans.empty()) {
        spans = dash_spans(line);
        for (std::size_t s = 0; s < spans.size(); ++s) {
          const std::size_t end = spans[s].end == std::string_view::npos
                                      ? line.size() + 64
                                      : spans[s].end;
          if (header_calls_pos < end && calls_col == std::string_view::npos) {
            calls_col = s;
          }
        }
        name_col = spans.empty() ? std::string_view::npos : spans.size() - 1;
      }
      continue;
    }
    if (header_calls_pos == std::string_view::npos || trim(line).empty()) continue;

    std::string_view name;
    std::string_view calls;
    if (!spans.empty() && calls_col != std::string_view::npos) {
      name = field(line, spans[name_col]);
      calls = field(line, spans[calls_col]);
    } else {
      // No separator line: fixed order "% time, seconds, usecs/call, calls".
      auto tokens = split(trim(line), ' ');
      std::erase_if(tokens, [](const std::string& t) { return t.empty(); });
      if (tokens.size() < 5) continue;
      name = line.substr(line.rfind(tokens.back()));
      calls = line.substr(line.find(tokens[3], line.find(tokens[2]) + tokens[2].size()),
                          tokens[3].size());
    }
    if (name == "total" || !is_syscall_name(name)) continue;
    std::int64_t value = 0;
    if (!parse_int(calls, value) || value < 0) continue;
    summary.counts[std::string(name)] += static_cast<std::uint64_t>(value);
    any_row = true;
  }
  if (!any_row) throw MalformedSummary("summary has no per-syscall rows");
  return summary;
}

std::string format_summary(const SyscallSummary& summary) {
  std::vector<std::pair<std::string, std::uint64_t>> rows(summary.counts.begin(),
                                                          summary.counts.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.second > b.second;
  });
  const std::string sep =
      "------ ----------- ----------- --------- --------- ----------------\n";
  std::string out = "% time     seconds  usecs/call     calls    errors syscall\n";
  out += sep;
  char buf[160];
  for (const auto& [name, count] : rows) {
    std::snprintf(buf, sizeof buf, "%6.2f %11.6f %11d %9llu %9s %s\n", 0.0, 0.0, 0,
                  static_cast<unsigned long long>(count), "", name.c_str());
    out += buf;
  }
  out += sep;
  std::snprintf(buf, sizeof buf, "%6.2f %11.6f %11s %9llu %9s %s\n", 100.0, 0.0, "",
                static_cast<unsigned long long>(summary.total()), "", "total");
  out += buf;
  return out;
}

std::string format_raw_trace(const TraceLog& log) {
  std::string out;
  for (const auto& ev : log.events) {
    out += std::to_string(ev.pid);
    out += ' ';
    out += ev.syscall;
    out += '(';
    out += ev.args_text;
    out += ") = ";
    out += ev.retval.empty() ? "?" : ev.retval;
    out += '\n';
  }
  return out;
}

}  // namespace modelwarden::trace
