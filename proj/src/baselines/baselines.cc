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

#include "modelwarden/baselines/baselines.h"

#include "modelwarden/common/io.h"
#include "modelwarden/pickle/machine.h"

namespace modelwarden::baselines {

namespace detail {
extern const char kDefaultImportBlacklist[];
extern const char kDefaultSyscallBlacklist[];
}  // namespace detail

namespace {

// Non-blank lines with '#' comments stripped.
std::vector<std::string> content_lines(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& raw : split(text, '\n')) {
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) out.emplace_back(line);
  }
  return out;
}

}  // namespace

const ImportBlacklist& ImportBlacklist::default_list() {
  static const ImportBlacklist list = parse(detail::kDefaultImportBlacklist);
  return list;
}

ImportBlacklist ImportBlacklist::parse(std::string_view text) {
  ImportBlacklist list;
  std::size_t line_no = 0;
  for (const auto& line : content_lines(text)) {
    ++line_no;
    const auto space = line.find_first_of(" \t");
    if (space == std::string::npos) {
      throw ParseError("import blacklist entry " + std::to_string(line_no) +
                       " needs '<module> <name>': " + line);
    }
    list.add(line.substr(0, space), std::string(trim(std::string_view(line).substr(space))));
  }
  if (list.entries_.empty()) throw ParseError("import blacklist is empty");
  return list;
}

ImportBlacklist ImportBlacklist::load(const std::filesystem::path& path) {
  return parse(read_file_text(path));
}

void ImportBlacklist::add(std::string module, std::string name) {
  entries_.emplace(std::move(module), std::move(name));
}

bool ImportBlacklist::matches(std::string_view module, std::string_view name) const {
  const std::string m(module);
  return entries_.contains({m, std::string(name)}) || entries_.contains({m, "*"});
}

const SyscallBlacklist& SyscallBlacklist::default_list() {
  static const SyscallBlacklist list = parse(detail::kDefaultSyscallBlacklist);
  return list;
}

SyscallBlacklist SyscallBlacklist::parse(std::string_view text) {
  SyscallBlacklist list;
  for (const auto& line : content_lines(text)) {
    if (!trace::is_syscall_name(line)) throw ParseError("not a syscall name: " + line);
    list.add(line);
  }
  if (list.names_.empty()) throw ParseError("syscall blacklist is empty");
  return list;
}

SyscallBlacklist SyscallBlacklist::load(const std::filesystem::path& path) {
  return parse(read_file_text(path));
}

void SyscallBlacklist::add(std::string name) { names_.insert(std::move(name)); }

StaticScanResult static_blacklist_scan(const pickle::PickleProgram& program,
                                       const ImportBlacklist& list) {
  StaticScanResult r;
  for (const auto& ref : pickle::extract_imports(program)) {
    if (ref.resolved && list.matches(ref.module, ref.name)) r.hits.push_back(ref.qualified());
  }
  r.verdict.score = static_cast<double>(r.hits.size());
  r.verdict.label = r.hits.empty() ? detectors::Label::kBenign : detectors::Label::kMalicious;
  return r;
}

DynamicScanResult dynamic_blacklist_scan(const trace::SyscallSummary& summary,
                                         const SyscallBlacklist& list) {
  DynamicScanResult r;
  for (const auto& [name, count] : summary.counts) {
    if (count > 0 && list.contains(name)) r.hits.push_back(name);
  }
  r.verdict.score = static_cast<double>(r.hits.size());
  r.verdict.label = r.hits.empty() ? detectors::Label::kBenign : detectors::Label::kMalicious;
  return r;
}

}  // namespace modelwarden::baselines
