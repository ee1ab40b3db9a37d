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

#include "modelwarden/pickle/opcodes.h"

#include <array>
#include <string>

#include "modelwarden/common/errors.h"

namespace modelwarden::pickle {

namespace {

using A = ArgKind;

constexpr std::array<OpcodeInfo, 68> kOpcodes = {{
    {'I', "INT", A::kDecimalnlShort, 0, false},
    {'J', "BININT", A::kInt4, 1, false},
    {'K', "BININT1", A::kUint1, 1, false},
    {'M', "BININT2", A::kUint2, 1, false},
    {'L', "LONG", A::kDecimalnlLong, 0, false},
    {0x8a, "LONG1", A::kLong1, 2, false},
    {0x8b, "LONG4", A::kLong4, 2, false},
    {'S', "STRING", A::kStringnl, 0, false},
    {'T', "BINSTRING", A::kString4, 1, false},
    {'U', "SHORT_BINSTRING", A::kString1, 1, false},
    {'B', "BINBYTES", A::kBytes4, 3, false},
    {'C', "SHORT_BINBYTES", A::kBytes1, 3, false},
    {0x8e, "BINBYTES8", A::kBytes8, 4, false},
    {0x96, "BYTEARRAY8", A::kBytes8, 5, false},
    {0x97, "NEXT_BUFFER", A::kNone, 5, false},
    {0x98, "READONLY_BUFFER", A::kNone, 5, false},
    {'N', "NONE", A::kNone, 0, false},
    {0x88, "NEWTRUE", A::kNone, 2, false},
    {0x89, "NEWFALSE", A::kNone, 2, false},
    {'V', "UNICODE", A::kUnicodestringnl, 0, false},
    {0x8c, "SHORT_BINUNICODE", A::kUnicodestring1, 4, false},
    {'X', "BINUNICODE", A::kUnicodestring4, 1, false},
    {0x8d, "BINUNICODE8", A::kUnicodestring8, 4, false},
    {'F', "FLOAT", A::kFloatnl, 0, false},
    {'G', "BINFLOAT", A::kFloat8, 1, false},
    {']', "EMPTY_LIST", A::kNone, 1, false},
    {'a', "APPEND", A::kNone, 0, false},
    {'e', "APPENDS", A::kNone, 1, true},
    {'l', "LIST", A::kNone, 0, true},
    {')', "EMPTY_TUPLE", A::kNone, 1, false},
    {'t', "TUPLE", A::kNone, 0, true},
    {0x85, "TUPLE1", A::kNone, 2, false},
    {0x86, "TUPLE2", A::kNone, 2, false},
    {0x87, "TUPLE3", A::kNone, 2, false},
    {'}', "EMPTY_DICT", A::kNone, 1, false},
    {'d', "DICT", A::kNone, 0, true},
    {'s', "SETITEM", A::kNone, 0, false},
    {'u', "SETITEMS", A::kNone, 1, true},
    {0x8f, "EMPTY_SET", A::kNone, 4, false},
    {0x90, "ADDITEMS", A::kNone, 4, true},
    {0x91, "FROZENSET", A::kNone, 4, true},
    {'0', "POP", A::kNone, 0, false},
    {'2', "DUP", A::kNone, 0, false},
    {'(', "MARK", A::kNone, 0, false},
    {'1', "POP_MARK", A::kNone, 1, true},
    {'g', "GET", A::kDecimalnlShort, 0, false},
    {'h', "BINGET", A::kUint1, 1, false},
    {'j', "LONG_BINGET", A::kUint4, 1, false},
    {'p', "PUT", A::kDecimalnlShort, 0, false},
    {'q', "BINPUT", A::kUint1, 1, false},
    {'r', "LONG_BINPUT", A::kUint4, 1, false},
    {0x94, "MEMOIZE", A::kNone, 4, false},
    {0x82, "EXT1", A::kUint1, 2, false},
    {0x83, "EXT2", A::kUint2, 2, false},
    {0x84, "EXT4", A::kInt4, 2, false},
    {'c', "GLOBAL", A::kStringnlNoescapePair, 0, false},
    {0x93, "STACK_GLOBAL", A::kNone, 4, false},
    {'R', "REDUCE", A::kNone, 0, false},
    {'b', "BUILD", A::kNone, 0, false},
    {'i', "INST", A::kStringnlNoescapePair, 0, true},
    {'o', "OBJ", A::kNone, 1, true},
    {0x81, "NEWOBJ", A::kNone, 2, false},
    {0x92, "NEWOBJ_EX", A::kNone, 4, false},
    {0x80, "PROTO", A::kUint1, 2, false},
    {'.', "STOP", A::kNone, 0, false},
    {0x95, "FRAME", A::kUint8, 4, false},
    {'P', "PERSID", A::kStringnlNoescape, 0, false},
    {'Q', "BINPERSID", A::kNone, 1, false},
}};

struct ByteIndex {
  std::array<const OpcodeInfo*, 256> by_code{};
  ByteIndex() {
    for (const auto& info : kOpcodes) by_code[info.code] = &info;
  }
};

const ByteIndex& byte_index() {
  static const ByteIndex index;
  return index;
}

}  // namespace

std::span<const OpcodeInfo> opcode_table() { return kOpcodes; }

const OpcodeInfo* find_opcode(std::uint8_t code) {
  return byte_index().by_code[code];
}

const OpcodeInfo* find_opcode(std::string_view name) {
  for (const auto& info : kOpcodes) {
    if (info.name == name) return &info;
  }
  return nullptr;
}

StackEffect stack_effect(const OpcodeInfo& info) {
  const std::string_view m = info.name;
  if (m == "POP") return {1, 0};
  if (m == "STACK_GLOBAL" || m == "TUPLE2") return {2, 1};
  if (m == "TUPLE1") return {1, 1};
  if (m == "TUPLE3" || m == "SETITEM" || m == "NEWOBJ_EX") return {3, 1};
  if (m == "TUPLE" || m == "FROZENSET" || m == "LIST" || m == "DICT" || m == "INST" ||
      m == "OBJ") {
    return {0, 1};
  }
  if (m == "APPENDS" || m == "SETITEMS" || m == "ADDITEMS") return {1, 1};
  if (m == "APPEND" || m == "BUILD" || m == "REDUCE" || m == "NEWOBJ") return {2, 1};
  if (m == "READONLY_BUFFER" || m == "BINPERSID" || m == "PUT" || m == "BINPUT" ||
      m == "LONG_BINPUT" || m == "MEMOIZE") {
    return {1, 1};
  }
  if (m == "DUP") return {1, 2};
  if (m == "STOP") return {1, 0};
  if (m == "POP_MARK" || m == "PROTO" || m == "FRAME" || m == "MARK") return {0, 0};
  return {0, 1};
}

const OpcodeInfo& opcode(std::string_view name) {
  const OpcodeInfo* info = find_opcode(name);
  if (info == nullptr) throw Error("unknown pickle opcode name: " + std::string(name));
  return *info;
}

}  // namespace modelwarden::pickle
