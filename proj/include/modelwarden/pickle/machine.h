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

#ifndef MODELWARDEN_PICKLE_MACHINE_H_
#define MODELWARDEN_PICKLE_MACHINE_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modelwarden/common/feature_map.h"
#include "modelwarden/pickle/program.h"

namespace modelwarden::pickle {

// A call the loader would have performed. Nothing is executed.
struct RecordedCall {
  std::string callable;  // "module name", or "<object>" when not static
  std::size_t nargs = 0;
  std::string via;       // REDUCE, INST, OBJ, NEWOBJ, NEWOBJ_EX
  std::size_t position = 0;

  bool operator==(const RecordedCall&) const = default;
};

struct MemoCollision {
  std::uint64_t index = 0;
  std::size_t first_position = 0;
  std::size_t position = 0;
};

struct ValidationReport {
  bool success = false;
  std::vector<std::string> failures;
  std::vector<RecordedCall> calls;
  std::vector<MemoCollision> memo_collisions;
  int protocol = 0;
  std::size_t opcode_count = 0;
};

// Runs the program on an abstract stack machine. Never throws on bad input;
// undecodable bytes become failures in the report.
ValidationReport validate(std::span<const std::uint8_t> data);
ValidationReport validate(const PickleProgram& program);

struct ImportRef {
  std::string module;
  std::string name;
  bool resolved = true;  // false for a STACK_GLOBAL whose operands are unknown
  std::string via;       // GLOBAL, STACK_GLOBAL or INST
  std::size_t position = 0;

  std::string qualified() const { return module + " " + name; }
};

std::vector<ImportRef> extract_imports(const PickleProgram& program);

// op::<MNEMONIC> -> occurrence count for every opcode in the program.
FeatureMap static_features(const PickleProgram& program);

}  // namespace modelwarden::pickle

#endif  // MODELWARDEN_PICKLE_MACHINE_H_
