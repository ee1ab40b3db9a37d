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

#ifndef MODELWARDEN_PICKLE_PROGRAM_H_
#define MODELWARDEN_PICKLE_PROGRAM_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "modelwarden/common/errors.h"
#include "modelwarden/common/io.h"
#include "modelwarden/pickle/opcodes.h"

namespace modelwarden::pickle {

class TruncatedProgram : public ParseError {
 public:
  explicit TruncatedProgram(std::size_t position);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class UnknownOpcode : public ParseError {
 public:
  UnknownOpcode(std::size_t position, std::uint8_t byte);
  std::size_t position() const { return position_; }
  std::uint8_t byte() const { return byte_; }

 private:
  std::size_t position_;
  std::uint8_t byte_;
};

// Decoded opcode argument.
struct OpArg {
  enum class Kind { kNone, kInt, kBool, kFloat, kText, kBytes, kBigInt };
  Kind kind = Kind::kNone;
  std::int64_t integer = 0;
  double real = 0.0;
  // Text (UTF-8 / latin-1 decoded strings, "module name" pairs), raw bytes,
  // or the decimal digits of an integer that does not fit in 64 bits.
  std::string data;

  static OpArg none() { return {}; }
  static OpArg of_int(std::int64_t v) { return {Kind::kInt, v, 0.0, {}}; }
  static OpArg of_bool(bool v) { return {Kind::kBool, v ? 1 : 0, 0.0, {}}; }
  static OpArg of_float(double v) { return {Kind::kFloat, 0, v, {}}; }
  static OpArg of_text(std::string v) { return {Kind::kText, 0, 0.0, std::move(v)}; }
  static OpArg of_bytes(std::string v) { return {Kind::kBytes, 0, 0.0, std::move(v)}; }

  bool operator==(const OpArg&) const = default;
};

struct Opcode {
  std::size_t position = 0;
  const OpcodeInfo* info = nullptr;
  OpArg arg;
  // The argument exactly as encoded after the opcode byte.
  Bytes raw_arg;

  std::uint8_t code() const { return info->code; }
  std::string_view mnemonic() const { return info->name; }
  std::size_t encoded_size() const { return 1 + raw_arg.size(); }
};

struct PickleProgram {
  std::vector<Opcode> opcodes;
  int protocol = 0;
  bool ends_with_stop = false;
  // Bytes after STOP that were not decoded.
  std::size_t trailing_bytes = 0;
};

// Decodes opcodes until STOP or the end of input. A stream that ends between
// opcodes yields ends_with_stop == false (payload fragments look like this);
// one that ends inside an argument throws TruncatedProgram.
PickleProgram disassemble(std::span<const std::uint8_t> data);

// Concatenates opcode bytes; the inverse of disassemble on STOP-terminated
// input without trailing bytes.
Bytes assemble(std::span<const Opcode> opcodes);

// Builds an opcode from a decoded argument, producing the canonical encoding.
// Throws modelwarden::Error when the value does not fit the argument kind.
Opcode make_opcode(const OpcodeInfo& info, OpArg arg = {});
Opcode make_opcode(std::string_view mnemonic, OpArg arg = {});

// Helpers for memo references: the 1-byte form when the index fits, else 4-byte.
Opcode make_put(std::uint64_t index);
Opcode make_get(std::uint64_t index);

bool is_put(const Opcode& op);       // PUT, BINPUT, LONG_BINPUT
bool is_get(const Opcode& op);       // GET, BINGET, LONG_BINGET
bool is_memoize(const Opcode& op);   // MEMOIZE
// Memo index referenced by a PUT/GET-family opcode.
std::uint64_t memo_index(const Opcode& op);
// Same family and width class, new index (text forms stay text).
Opcode with_memo_index(const Opcode& op, std::uint64_t index);

// pickletools.dis-compatible listing: "%5d: %-4s NAME      repr(arg)".
std::string format_disassembly(const PickleProgram& program);

// Python repr() of a str value (quote selection and escapes as CPython).
std::string python_str_repr(std::string_view utf8);
std::string python_bytes_repr(std::string_view bytes);

}  // namespace modelwarden::pickle

#endif  // MODELWARDEN_PICKLE_PROGRAM_H_
