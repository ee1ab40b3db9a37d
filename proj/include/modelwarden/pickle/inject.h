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

#ifndef MODELWARDEN_PICKLE_INJECT_H_
#define MODELWARDEN_PICKLE_INJECT_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "modelwarden/common/errors.h"
#include "modelwarden/common/io.h"
#include "modelwarden/pickle/program.h"

namespace modelwarden::pickle {

class HostParseFailure : public ParseError {
 public:
  using ParseError::ParseError;
};

class RemapOverflow : public Error {
 public:
  using Error::Error;
};

// The payload does not satisfy the splice contract.
class InvalidPayload : public ParseError {
 public:
  using ParseError::ParseError;
};

struct InjectionPayload {
  std::string name;
  std::vector<Opcode> opcodes;
  bool blocking = false;
  std::string description;
};

// Decodes a raw opcode fragment and checks it: at least one GLOBAL or
// STACK_GLOBAL and one REDUCE, no PROTO/FRAME/STOP, balanced marks, and a net
// stack effect of exactly one value.
InjectionPayload make_payload(std::string name, std::span<const std::uint8_t> fragment,
                              bool blocking = false, std::string description = {});
void check_payload(const InjectionPayload& payload);

struct MemoRemap {
  std::uint64_t offset = 0;
};

struct InjectionResult {
  Bytes bytes;
  MemoRemap remap;
  std::size_t splice_offset = 0;  // byte offset of the first payload opcode
  std::size_t splice_length = 0;  // payload bytes plus the trailing POP
  // Host memoizes with MEMOIZE, so payload memo writes were dropped instead of
  // remapped (implicit indices would otherwise shift).
  bool implicit_memo_host = false;
};

// Splices the payload right after the host's PROTO (or at offset 0 for
// protocol 0/1 hosts) followed by POP. Host bytes are unchanged.
InjectionResult inject_detailed(std::span<const std::uint8_t> model,
                                const InjectionPayload& payload);
Bytes inject(std::span<const std::uint8_t> model, const InjectionPayload& payload);

// Offset that makes the payload's memo indices disjoint from the host's.
MemoRemap plan_remap(const PickleProgram& host);

// Payload library: <name>.pkl (raw fragment) + <name>.json sidecar with
// {"name", "blocking", "description"}. Sorted by name.
std::vector<InjectionPayload> load_payload_library(const std::filesystem::path& dir);
InjectionPayload load_payload(const std::filesystem::path& pkl_path);
void save_payload(const std::filesystem::path& dir, const InjectionPayload& payload);

}  // namespace modelwarden::pickle

#endif  // MODELWARDEN_PICKLE_INJECT_H_
