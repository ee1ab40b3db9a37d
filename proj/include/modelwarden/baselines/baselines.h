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

#ifndef MODELWARDEN_BASELINES_BASELINES_H_
#define MODELWARDEN_BASELINES_BASELINES_H_

// Blacklist scanners used as reference points for the learned detectors.

#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "modelwarden/detectors/detectors.h"
#include "modelwarden/pickle/program.h"
#include "modelwarden/trace/trace.h"

namespace modelwarden::baselines {

using detectors::Verdict;

// Entries are "<module> <name>"; a name of "*" matches the whole module.
class ImportBlacklist {
 public:
  static const ImportBlacklist& default_list();
  static ImportBlacklist parse(std::string_view text);
  static ImportBlacklist load(const std::filesystem::path& path);

  bool matches(std::string_view module, std::string_view name) const;
  const std::set<std::pair<std::string, std::string>>& entries() const { return entries_; }
  void add(std::string module, std::string name);

 private:
  std::set<std::pair<std::string, std::string>> entries_;
};

class SyscallBlacklist {
 public:
  static const SyscallBlacklist& default_list();
  // Throws ParseError on an empty list or an invalid name.
  static SyscallBlacklist parse(std::string_view text);
  static SyscallBlacklist load(const std::filesystem::path& path);

  bool contains(std::string_view name) const { return names_.contains(std::string(name)); }
  const std::set<std::string>& names() const { return names_; }
  void add(std::string name);

 private:
  std::set<std::string> names_;
};

struct StaticScanResult {
  Verdict verdict;
  std::vector<std::string> hits;  // "module name" per matching import
};

// Flags a pickle when any resolved GLOBAL/STACK_GLOBAL/INST import is
// blacklisted. Unresolved STACK_GLOBAL operands cannot match.
StaticScanResult static_blacklist_scan(const pickle::PickleProgram& program,
                                       const ImportBlacklist& list = ImportBlacklist::default_list());

struct DynamicScanResult {
  Verdict verdict;
  std::vector<std::string> hits;  // blacklisted syscalls present, sorted
};

// Flags a trace when any blacklisted syscall has a non-zero count.
DynamicScanResult dynamic_blacklist_scan(const trace::SyscallSummary& summary,
                                         const SyscallBlacklist& list = SyscallBlacklist::default_list());

}  // namespace modelwarden::baselines

#endif  // MODELWARDEN_BASELINES_BASELINES_H_
