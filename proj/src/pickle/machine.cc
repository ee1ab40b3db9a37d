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

#include "modelwarden/pickle/machine.h"

#include <map>
#include <utility>

namespace modelwarden::pickle {

namespace {

struct Value {
  enum class Kind {
    kNone, kBool, kInt, kFloat, kStr, kBytes, kTuple, kList, kDict, kSet,
    kGlobal, kObject, kPersistent, kBuffer,
  };
  Kind kind = Kind::kNone;
  std::string text;        // kStr contents, kGlobal "module name"
  std::size_t length = 0;  // kTuple arity
};

using K = Value::Kind;

class Failure {
 public:
  explicit Failure(std::string message) : message_(std::move(message)) {}
  const std::string& message() const { return message_; }

 private:
  std::string message_;
};

class Machine {
 public:
  void step(const Opcode& op);

  std::vector<RecordedCall> calls;
  std::vector<MemoCollision> collisions;
  std::vector<ImportRef> imports;
  bool stopped = false;

 private:
  Value pop(const Opcode& op) {
    if (stack_.empty()) fail(op, "stack underflow");
    Value v = std::move(stack_.back());
    stack_.pop_back();
    return v;
  }
  Value& top(const Opcode& op) {
    if (stack_.empty()) fail(op, "stack underflow");
    return stack_.back();
  }
  std::vector<Value> pop_mark(const Opcode& op) {
    if (metastack_.empty()) fail(op, "no MARK to pop");
    std::vector<Value> items = std::move(stack_);
    stack_ = std::move(metastack_.back());
    metastack_.pop_back();
    return items;
  }
  void push(Value v) { stack_.push_back(std::move(v)); }
  void push(K kind) { stack_.push_back(Value{kind, {}, 0}); }

  [[noreturn]] static void fail(const Opcode& op, const std::string& what) {
    throw Failure(std::string(op.mnemonic()) + " at " + std::to_string(op.position) +
                  ": " + what);
  }

  static bool callable(const Value& v) {
    return v.kind == K::kGlobal || v.kind == K::kObject;
  }
  static std::string callable_name(const Value& v) {
    return v.kind == K::kGlobal ? v.text : "<object>";
  }

  void memo_put(const Opcode& op, std::uint64_t index) {
    const Value& v = top(op);
    auto [it, inserted] = memo_.try_emplace(index, v, op.position);
    if (!inserted) {
      collisions.push_back({index, it->second.second, op.position});
      it->second = {v, op.position};
    }
  }

  void record(const Opcode& op, const Value& fn, std::size_t nargs) {
    calls.push_back({callable_name(fn), nargs, std::string(op.mnemonic()), op.position});
  }

  void require_container(const Opcode& op, const Value& v, K kind) {
    if (v.kind != kind && v.kind != K::kObject) fail(op, "target is not a container");
  }

  std::vector<Value> stack_;
  std::vector<std::vector<Value>> metastack_;
  std::map<std::uint64_t, std::pair<Value, std::size_t>> memo_;
};

void Machine::step(const Opcode& op) {
  const std::string_view m = op.mnemonic();
  if (m == "INT") {
    push(op.arg.kind == OpArg::Kind::kBool ? K::kBool : K::kInt);
  } else if (m == "BININT" || m == "BININT1" || m == "BININT2" || m == "LONG" ||
             m == "LONG1" || m == "LONG4") {
    push(K::kInt);
  } else if (m == "STRING" || m == "BINSTRING" || m == "SHORT_BINSTRING" || m == "UNICODE" ||
             m == "SHORT_BINUNICODE" || m == "BINUNICODE" || m == "BINUNICODE8") {
    push(Value{K::kStr, op.arg.data, 0});
  } else if (m == "BINBYTES" || m == "SHORT_BINBYTES" || m == "BINBYTES8" ||
             m == "BYTEARRAY8") {
    push(K::kBytes);
  } else if (m == "NEXT_BUFFER") {
    push(K::kBuffer);
  } else if (m == "READONLY_BUFFER") {
    top(op);
  } else if (m == "NONE") {
    push(K::kNone);
  } else if (m == "NEWTRUE" || m == "NEWFALSE") {
    push(K::kBool);
  } else if (m == "FLOAT" || m == "BINFLOAT") {
    push(K::kFloat);
  } else if (m == "EMPTY_LIST") {
    push(K::kList);
  } else if (m == "APPEND") {
    pop(op);
    require_container(op, top(op), K::kList);
  } else if (m == "APPENDS") {
    pop_mark(op);
    require_container(op, top(op), K::kList);
  } else if (m == "LIST") {
    pop_mark(op);
    push(K::kList);
  } else if (m == "EMPTY_TUPLE") {
    push(Value{K::kTuple, {}, 0});
  } else if (m == "TUPLE") {
    const auto items = pop_mark(op);
    push(Value{K::kTuple, {}, items.size()});
  } else if (m == "TUPLE1" || m == "TUPLE2" || m == "TUPLE3") {
    const std::size_t n = static_cast<std::size_t>(m.back() - '0');
    for (std::size_t i = 0; i < n; ++i) pop(op);
    push(Value{K::kTuple, {}, n});
  } else if (m == "EMPTY_DICT") {
    push(K::kDict);
  } else if (m == "DICT") {
    if (pop_mark(op).size() % 2 != 0) fail(op, "odd number of items");
    push(K::kDict);
  } else if (m == "SETITEM") {
    pop(op);
    pop(op);
    require_container(op, top(op), K::kDict);
  } else if (m == "SETITEMS") {
    if (pop_mark(op).size() % 2 != 0) fail(op, "odd number of items");
    require_container(op, top(op), K::kDict);
  } else if (m == "EMPTY_SET") {
    push(K::kSet);
  } else if (m == "ADDITEMS") {
    pop_mark(op);
    require_container(op, top(op), K::kSet);
  } else if (m == "FROZENSET") {
    pop_mark(op);
    push(K::kSet);
  } else if (m == "POP") {
    if (stack_.empty() && !metastack_.empty()) {
      pop_mark(op);
    } else {
      pop(op);
    }
  } else if (m == "DUP") {
    push(top(op));
  } else if (m == "MARK") {
    metastack_.push_back(std::move(stack_));
    stack_.clear();
  } else if (m == "POP_MARK") {
    pop_mark(op);
  } else if (is_get(op)) {
    auto it = memo_.find(memo_index(op));
    if (it == memo_.end()) fail(op, "memo key " + std::to_string(memo_index(op)) + " undefined");
    push(it->second.first);
  } else if (is_put(op)) {
    if (op.arg.kind == OpArg::Kind::kBool || op.arg.integer < 0) fail(op, "bad memo index");
    memo_put(op, memo_index(op));
  } else if (m == "MEMOIZE") {
    memo_put(op, memo_.size());
  } else if (m == "EXT1" || m == "EXT2" || m == "EXT4") {
    push(Value{K::kGlobal, "<extension " + std::to_string(op.arg.integer) + ">", 0});
  } else if (m == "GLOBAL") {
    const auto sp = op.arg.data.find(' ');
    imports.push_back({op.arg.data.substr(0, sp),
                       sp == std::string::npos ? std::string() : op.arg.data.substr(sp + 1),
                       true, "GLOBAL", op.position});
    push(Value{K::kGlobal, op.arg.data, 0});
  } else if (m == "STACK_GLOBAL") {
    const Value name = pop(op);
    const Value module = pop(op);
    if (name.kind != K::kStr || module.kind != K::kStr) fail(op, "operands must be str");
    imports.push_back({module.text, name.text, true, "STACK_GLOBAL", op.position});
    push(Value{K::kGlobal, module.text + " " + name.text, 0});
  } else if (m == "REDUCE") {
    const Value args = pop(op);
    const Value fn = pop(op);
    if (args.kind != K::kTuple) fail(op, "argument is not a tuple");
    if (!callable(fn)) fail(op, "callable expected");
    record(op, fn, args.length);
    push(K::kObject);
  } else if (m == "BUILD") {
    pop(op);
    top(op);
  } else if (m == "INST") {
    const auto items = pop_mark(op);
    const auto sp = op.arg.data.find(' ');
    imports.push_back({op.arg.data.substr(0, sp),
                       sp == std::string::npos ? std::string() : op.arg.data.substr(sp + 1),
                       true, "INST", op.position});
    record(op, Value{K::kGlobal, op.arg.data, 0}, items.size());
    push(K::kObject);
  } else if (m == "OBJ") {
    const auto items = pop_mark(op);
    if (items.empty()) fail(op, "missing class");
    if (!callable(items.front())) fail(op, "callable expected");
    record(op, items.front(), items.size() - 1);
    push(K::kObject);
  } else if (m == "NEWOBJ") {
    const Value args = pop(op);
    const Value cls = pop(op);
    if (args.kind != K::kTuple) fail(op, "argument is not a tuple");
    if (!callable(cls)) fail(op, "callable expected");
    record(op, cls, args.length);
    push(K::kObject);
  } else if (m == "NEWOBJ_EX") {
    const Value kwargs = pop(op);
    const Value args = pop(op);
    const Value cls = pop(op);
    if (args.kind != K::kTuple) fail(op, "argument is not a tuple");
    if (kwargs.kind != K::kDict && kwargs.kind != K::kObject) fail(op, "kwargs is not a dict");
    if (!callable(cls)) fail(op, "callable expected");
    record(op, cls, args.length);
    push(K::kObject);
  } else if (m == "PROTO") {
    if (op.arg.integer > kHighestProtocol) fail(op, "unsupported protocol");
  } else if (m == "STOP") {
    pop(op);
    stopped = true;
  } else if (m == "FRAME") {
    // Framing has no stack effect.
  } else if (m == "PERSID") {
    push(K::kPersistent);
  } else if (m == "BINPERSID") {
    pop(op);
    push(K::kPersistent);
  } else {
    fail(op, "unhandled opcode");
  }
}

}  // namespace

ValidationReport validate(const PickleProgram& program) {
  ValidationReport report;
  report.protocol = program.protocol;
  report.opcode_count = program.opcodes.size();
  Machine machine;
  try {
    for (const auto& op : program.opcodes) machine.step(op);
    if (!machine.stopped) throw Failure("program does not end with STOP");
    report.success = true;
  } catch (const Failure& f) {
    report.failures.push_back(f.message());
  }
  report.calls = std::move(machine.calls);
  report.memo_collisions = std::move(machine.collisions);
  return report;
}

ValidationReport validate(std::span<const std::uint8_t> data) {
  try {
    return validate(disassemble(data));
  } catch (const Error& e) {
    ValidationReport report;
    report.failures.push_back(e.what());
    return report;
  }
}

std::vector<ImportRef> extract_imports(const PickleProgram& program) {
  Machine machine;
  std::size_t i = 0;
  try {
    for (; i < program.opcodes.size(); ++i) machine.step(program.opcodes[i]);
  } catch (const Failure&) {
    // The stack is no longer trustworthy; scan the rest without it.
  }
  std::vector<ImportRef> out = std::move(machine.imports);
  for (; i < program.opcodes.size(); ++i) {
    const Opcode& op = program.opcodes[i];
    const auto m = op.mnemonic();
    if (m == "GLOBAL" || m == "INST") {
      const auto sp = op.arg.data.find(' ');
      out.push_back({op.arg.data.substr(0, sp),
                     sp == std::string::npos ? std::string() : op.arg.data.substr(sp + 1),
                     true, std::string(m), op.position});
    } else if (m == "STACK_GLOBAL") {
      out.push_back({"", "", false, "STACK_GLOBAL", op.position});
    }
  }
  return out;
}

FeatureMap static_features(const PickleProgram& program) {
  FeatureMap out;
  for (const auto& op : program.opcodes) out["op::" + std::string(op.mnemonic())] += 1.0;
  return out;
}

}  // namespace modelwarden::pickle
