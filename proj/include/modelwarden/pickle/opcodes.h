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

#ifndef MODELWARDEN_PICKLE_OPCODES_H_
#define MODELWARDEN_PICKLE_OPCODES_H_

#include <cstdint>
#include <span>
#include <string_view>

namespace modelwarden::pickle {

// Argument encodings of the pickle virtual machine (names follow pickletools).
enum class ArgKind {
  kNone,
  kUint1,
  kUint2,
  kInt4,
  kUint4,
  kUint8,
  kDecimalnlShort,
  kDecimalnlLong,
  kFloatnl,
  kFloat8,
  kLong1,
  kLong4,
  kStringnl,
  kStringnlNoescape,
  kStringnlNoescapePair,
  kString1,
  kString4,
  kBytes1,
  kBytes4,
  kBytes8,
  kUnicodestringnl,
  kUnicodestring1,
  kUnicodestring4,
  kUnicodestring8,
};

struct OpcodeInfo {
  std::uint8_t code;
  std::string_view name;
  ArgKind arg;
  int protocol;       // first protocol that defines the opcode
  bool pops_mark;     // consumes everything down to the topmost MARK
};

// Values consumed/produced, not counting the MARK region itself for
// opcodes with pops_mark (those first discard everything above the MARK).
struct StackEffect {
  int pops = 0;
  int pushes = 0;
};
StackEffect stack_effect(const OpcodeInfo& info);

// Every opcode of protocols 0 through 5, in pickletools order.
std::span<const OpcodeInfo> opcode_table();

// nullptr when `code` is not a pickle opcode.
const OpcodeInfo* find_opcode(std::uint8_t code);
const OpcodeInfo* find_opcode(std::string_view name);
// Throws modelwarden::Error for unknown names.
const OpcodeInfo& opcode(std::string_view name);

inline constexpr int kHighestProtocol = 5;

}  // namespace modelwarden::pickle

#endif  // MODELWARDEN_PICKLE_OPCODES_H_
