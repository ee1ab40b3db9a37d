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

#include "modelwarden/pickle/inject.h"

#include <algorithm>
#include <map>
#include <set>

#include "json.hpp"

namespace modelwarden::pickle {

namespace {

constexpr std::uint64_t kMaxMemoIndex = 0xFFFFFFFFULL;

// Values whose rebuild by replaying their opcodes is indistinguishable from
// the memoized original: immutable results of side-effect-free opcodes.
bool replayable(const Opcode& op) {
  const std::string_view m = op.mnemonic();
  if (m == "STACK_GLOBAL" || m == "TUPLE1" || m == "TUPLE2" || m == "TUPLE3" || m == "TUPLE" ||
      m == "FROZENSET") {
    return true;
  }
  if (op.info->pops_mark || stack_effect(*op.info).pops > 0) return false;
  return !(m == "EMPTY_LIST" || m == "EMPTY_DICT" || m == "EMPTY_SET" || m == "BYTEARRAY8" ||
           m == "NEXT_BUFFER" || m == "PERSID" || m == "PROTO" || m == "FRAME" ||
           m == "MARK" || m == "POP_MARK");
}

struct Recipe {
  std::vector<Opcode> ops;
  bool replayable = true;
};

// Symbolic run of a payload fragment. Tracks stack depth and, for each slot,
// the opcode sequence that rebuilds the value without memo references.
class PayloadSim {
 public:
  explicit PayloadSim(const InjectionPayload& payload) : payload_(payload) {}

  // Returns the payload with memo traffic rewritten by `rewrite_memo`.
  template <typename MemoFn>
  std::vector<Opcode> run(MemoFn&& rewrite_memo) {
    std::vector<Opcode> out;
    for (const auto& op : payload_.opcodes) {
      const std::string_view m = op.mnemonic();
      if (m == "PROTO" || m == "FRAME" || m == "STOP") {
        invalid("payload may not contain " + std::string(m));
      }
      if (m == "MARK") {
        meta_.push_back(std::move(stack_));
        stack_.clear();
        out.push_back(op);
        continue;
      }
      if (m == "DUP") {
        need(1, op);
        stack_.push_back(stack_.back());
        out.push_back(op);
        continue;
      }
      if (is_get(op)) {
        const auto it = memo_.find(memo_index(op));
        if (it == memo_.end()) invalid("GET of undefined memo key");
        stack_.push_back(it->second);
        rewrite_memo(op, memo_index(op), it->second, out);
        continue;
      }
      if (is_put(op) || is_memoize(op)) {
        need(1, op);
        const std::uint64_t index = is_memoize(op) ? memo_.size() : memo_index(op);
        memo_[index] = stack_.back();
        rewrite_memo(op, index, stack_.back(), out);
        continue;
      }
      const StackEffect e = stack_effect(*op.info);
      Recipe result;
      result.replayable = replayable(op);
      if (op.info->pops_mark) {
        if (meta_.empty()) invalid(std::string(m) + " without MARK");
        std::vector<Recipe> items = std::move(stack_);
        stack_ = std::move(meta_.back());
        meta_.pop_back();
        result.ops.push_back(make_opcode("MARK"));
        for (auto& r : items) absorb(result, r);
      }
      need(static_cast<std::size_t>(e.pops), op);
      std::vector<Recipe> popped(stack_.end() - e.pops, stack_.end());
      stack_.resize(stack_.size() - static_cast<std::size_t>(e.pops));
      for (auto& r : popped) absorb(result, r);
      result.ops.push_back(op);
      if (m == "GLOBAL" || m == "STACK_GLOBAL") saw_import_ = true;
      for (int i = 0; i < e.pushes; ++i) stack_.push_back(result);
      out.push_back(op);
    }
    return out;
  }

  void check_shape() const {
    if (!meta_.empty()) invalid("unbalanced MARK");
    if (stack_.size() != 1) {
      invalid("net stack effect must be one value, got " + std::to_string(stack_.size()));
    }
    if (!saw_import_) invalid("no GLOBAL or STACK_GLOBAL");
    const bool has_reduce =
        std::any_of(payload_.opcodes.begin(), payload_.opcodes.end(),
                    [](const Opcode& op) { return op.mnemonic() == "REDUCE"; });
    if (!has_reduce) invalid("no REDUCE");
  }

 private:
  void need(std::size_t n, const Opcode& op) const {
    if (stack_.size() < n) {
      invalid(std::string(op.mnemonic()) + " underflows the payload stack");
    }
  }
  static void absorb(Recipe& into, const Recipe& part) {
    into.ops.insert(into.ops.end(), part.ops.begin(), part.ops.end());
    into.replayable = into.replayable && part.replayable;
  }
  [[noreturn]] void invalid(const std::string& why) const {
    throw InvalidPayload("payload '" + payload_.name + "': " + why);
  }

  const InjectionPayload& payload_;
  std::vector<Recipe> stack_;
  std::vector<std::vector<Recipe>> meta_;
  std::map<std::uint64_t, Recipe> memo_;
  bool saw_import_ = false;
};

bool host_uses_memoize(const PickleProgram& host) {
  return std::any_of(host.opcodes.begin(), host.opcodes.end(),
                     [](const Opcode& op) { return is_memoize(op); });
}

}  // namespace

void check_payload(const InjectionPayload& payload) {
  PayloadSim sim(payload);
  sim.run([](const Opcode& op, std::uint64_t, const Recipe&, std::vector<Opcode>& out) {
    out.push_back(op);
  });
  sim.check_shape();
}

InjectionPayload make_payload(std::string name, std::span<const std::uint8_t> fragment,
                              bool blocking, std::string description) {
  InjectionPayload payload;
  payload.name = std::move(name);
  payload.blocking = blocking;
  payload.description = std::move(description);
  PickleProgram program;
  try {
    program = disassemble(fragment);
  } catch (const ParseError& e) {
    throw InvalidPayload("payload '" + payload.name + "': " + e.what());
  }
  payload.opcodes = std::move(program.opcodes);
  check_payload(payload);
  return payload;
}

MemoRemap plan_remap(const PickleProgram& host) {
  std::set<std::uint64_t> keys;
  for (const auto& op : host.opcodes) {
    if (is_put(op)) {
      keys.insert(memo_index(op));
    } else if (is_memoize(op)) {
      keys.insert(keys.size());
    }
  }
  return {keys.empty() ? 0 : *keys.rbegin() + 1};
}

InjectionResult inject_detailed(std::span<const std::uint8_t> model,
                                const InjectionPayload& payload) {
  PickleProgram host;
  try {
    host = disassemble(model);
  } catch (const ParseError& e) {
    throw HostParseFailure(std::string("host does not disassemble: ") + e.what());
  }
  if (!host.ends_with_stop) throw HostParseFailure("host does not end with STOP");

  InjectionResult result;
  result.implicit_memo_host = host_uses_memoize(host);
  result.remap = plan_remap(host);
  const std::uint64_t offset = result.remap.offset;

  PayloadSim sim(payload);
  std::vector<Opcode> spliced;
  if (result.implicit_memo_host) {
    // Any payload memo write would shift the host's implicit indices, so
    // writes are dropped and reads replay the value instead.
    result.remap.offset = 0;
    spliced = sim.run([&](const Opcode& op, std::uint64_t, const Recipe& value,
                          std::vector<Opcode>& out) {
      if (!is_get(op)) return;
      if (!value.replayable) {
        throw InvalidPayload("payload '" + payload.name +
                             "' re-reads a mutable or computed memo value; it cannot be "
                             "spliced into a MEMOIZE host");
      }
      out.insert(out.end(), value.ops.begin(), value.ops.end());
    });
  } else {
    spliced = sim.run([&](const Opcode& op, std::uint64_t index, const Recipe&,
                          std::vector<Opcode>& out) {
      if (offset > kMaxMemoIndex || index > kMaxMemoIndex - offset) {
        throw RemapOverflow("memo index " + std::to_string(index) + " + offset " +
                            std::to_string(offset) + " exceeds 32 bits");
      }
      out.push_back(is_memoize(op) ? make_put(index + offset)
                                   : with_memo_index(op, index + offset));
    });
  }
  sim.check_shape();
  spliced.push_back(make_opcode("POP"));

  const bool has_proto =
      !host.opcodes.empty() && host.opcodes.front().mnemonic() == "PROTO";
  result.splice_offset = has_proto ? host.opcodes.front().encoded_size() : 0;
  const Bytes middle = assemble(spliced);
  result.splice_length = middle.size();
  result.bytes.reserve(model.size() + middle.size());
  result.bytes.insert(result.bytes.end(), model.begin(),
                      model.begin() + static_cast<std::ptrdiff_t>(result.splice_offset));
  result.bytes.insert(result.bytes.end(), middle.begin(), middle.end());
  result.bytes.insert(result.bytes.end(),
                      model.begin() + static_cast<std::ptrdiff_t>(result.splice_offset),
                      model.end());
  return result;
}

Bytes inject(std::span<const std::uint8_t> model, const InjectionPayload& payload) {
  return inject_detailed(model, payload).bytes;
}

InjectionPayload load_payload(const std::filesystem::path& pkl_path) {
  std::filesystem::path sidecar = pkl_path;
  sidecar.replace_extension(".json");
  std::string name = pkl_path.stem().string();
  bool blocking = false;
  std::string description;
  if (std::filesystem::exists(sidecar)) {
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(read_file_text(sidecar));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("bad payload sidecar " + sidecar.string() + ": " + e.what());
    }
    name = meta.value("name", name);
    blocking = meta.value("blocking", false);
    description = meta.value("description", "");
  }
  const Bytes fragment = read_file_bytes(pkl_path);
  return make_payload(std::move(name), fragment, blocking, std::move(description));
}

std::vector<InjectionPayload> load_payload_library(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error("payload directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pkl") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<InjectionPayload> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(load_payload(f));
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

void save_payload(const std::filesystem::path& dir, const InjectionPayload& payload) {
  std::filesystem::create_directories(dir);
  write_file_bytes(dir / (payload.name + ".pkl"), assemble(payload.opcodes));
  const nlohmann::json meta = {{"name", payload.name},
                               {"blocking", payload.blocking},
                               {"description", payload.description}};
  write_file_text(dir / (payload.name + ".json"), meta.dump(2) + "\n");
}

}  // namespace modelwarden::pickle
