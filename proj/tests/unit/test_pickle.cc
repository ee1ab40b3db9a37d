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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "modelwarden/common/io.h"
#include "modelwarden/pickle/container.h"
#include "modelwarden/pickle/inject.h"
#include "modelwarden/pickle/machine.h"
#include "modelwarden/pickle/opcodes.h"
#include "modelwarden/pickle/program.h"

namespace fs = std::filesystem;
using namespace modelwarden;
using namespace modelwarden::pickle;

namespace {

const fs::path kFixtures = fs::path(MODELWARDEN_FIXTURES) / "pickle";
const fs::path kPayloads = fs::path(MODELWARDEN_DATA_DIR) / "payloads";

// Literal overload keeps embedded NULs.
template <std::size_t N>
Bytes bytes_of(const char (&s)[N]) {
  return Bytes(s, s + N - 1);
}
Bytes bytes_of(const std::string& s) { return Bytes(s.begin(), s.end()); }

std::vector<fs::path> files_in(const fs::path& dir, std::string_view ext) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ext) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Pickle streams of every bundled host, unwrapped from zip containers.
std::vector<std::pair<std::string, Bytes>> host_streams() {
  std::vector<std::pair<std::string, Bytes>> out;
  for (const auto& ext : {".pkl", ".pt"}) {
    for (const auto& p : files_in(kFixtures / "hosts", ext)) {
      out.emplace_back(p.stem().string(), open_artifact(read_file_bytes(p)).pickle);
    }
  }
  return out;
}

Bytes panel(std::string_view name) {
  return read_file_bytes(kFixtures / "panels" / (std::string(name) + ".pkl"));
}

std::set<std::uint64_t> memo_writes(const PickleProgram& p) {
  std::set<std::uint64_t> keys;
  for (const auto& op : p.opcodes) {
    if (is_put(op)) keys.insert(memo_index(op));
    if (is_memoize(op)) keys.insert(keys.size());
  }
  return keys;
}

}  // namespace

TEST_CASE("opcode table matches the frozen pickletools table") {
  std::ifstream in(kFixtures / "pickletools_opcodes.txt");
  REQUIRE(in);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string hex, name, argname, pops_mark;
    int proto = 0;
    fields >> hex >> name >> argname >> proto >> pops_mark;
    const auto code = static_cast<std::uint8_t>(std::stoul(hex, nullptr, 16));
    const OpcodeInfo* info = find_opcode(code);
    REQUIRE_MESSAGE(info != nullptr, name);
    CHECK(info->name == name);
    CHECK(info->protocol == proto);
    CHECK(info->pops_mark == (pops_mark == "True"));
    CHECK(find_opcode(name) == info);
    ++rows;
  }
  CHECK(rows == opcode_table().size());
  CHECK(rows == 68);
}

TEST_CASE("disassembly listing equals pickletools output on every fixture") {
  std::size_t checked = 0;
  for (const auto& golden : files_in(kFixtures / "golden", ".dis")) {
    const std::string stem = golden.stem().string();
    const fs::path source = stem.rfind("panel_", 0) == 0
                                ? kFixtures / "panels" / (stem.substr(6) + ".pkl")
                                : kFixtures / "hosts" / (stem + ".pkl");
    const PickleProgram p = disassemble(read_file_bytes(source));
    CHECK_MESSAGE(format_disassembly(p) == read_file_text(golden), stem);
    ++checked;
  }
  CHECK(checked >= 12);
}

TEST_CASE("reassembly is byte-exact on every fixture") {
  auto streams = host_streams();
  for (const auto& p : files_in(kFixtures / "panels", ".pkl")) {
    streams.emplace_back(p.stem().string(), read_file_bytes(p));
  }
  REQUIRE(streams.size() >= 10);
  for (const auto& [name, data] : streams) {
    const PickleProgram p = disassemble(data);
    CHECK_MESSAGE(p.ends_with_stop, name);
    CHECK(p.trailing_bytes == 0);
    CHECK_MESSAGE(assemble(p.opcodes) == data, name);
    for (std::size_t i = 1; i < p.opcodes.size(); ++i) {
      CHECK(p.opcodes[i].position > p.opcodes[i - 1].position);
    }
  }
}

TEST_CASE("canonical encoder reproduces the pickler's argument bytes") {
  for (const auto& [name, data] : host_streams()) {
    for (const auto& op : disassemble(data).opcodes) {
      const Opcode rebuilt = make_opcode(*op.info, op.arg);
      CHECK_MESSAGE(rebuilt.raw_arg == op.raw_arg, name << " " << op.mnemonic() << " at "
                                                        << op.position);
    }
  }
}

TEST_CASE("minimal program and error cases") {
  const PickleProgram p = disassemble(bytes_of("\x80\x02."));
  REQUIRE(p.opcodes.size() == 2);
  CHECK(p.ends_with_stop);
  CHECK(p.protocol == 2);

  const Bytes trailing = bytes_of("\x80\x02.junk");
  CHECK(disassemble(trailing).trailing_bytes == 4);

  try {
    disassemble(bytes_of("\x80\x02\xff."));
    FAIL("expected UnknownOpcode");
  } catch (const UnknownOpcode& e) {
    CHECK(e.position() == 2);
    CHECK(e.byte() == 0xff);
  }
  try {
    disassemble(bytes_of("\x80\x02X\x10\x00\x00\x00" "abc"));
    FAIL("expected TruncatedProgram");
  } catch (const TruncatedProgram& e) {
    CHECK(e.position() == 2);
  }
  CHECK_THROWS_AS(disassemble(bytes_of("cos\nsystem")), TruncatedProgram);
  // Ends between opcodes: a fragment, not an error.
  CHECK_FALSE(disassemble(bytes_of("\x80\x02N")).ends_with_stop);
}

TEST_CASE("argument decoding") {
  SUBCASE("long1 sign handling") {
    CHECK(disassemble(bytes_of(std::string("\x8a\x01\xff.", 4))).opcodes[0].arg.integer == -1);
    CHECK(disassemble(bytes_of(std::string("\x8a\x02\x00\x80.", 5))).opcodes[0].arg.integer == -32768);
    CHECK(disassemble(bytes_of(std::string("\x8a\x00.", 3))).opcodes[0].arg.integer == 0);
    const auto big = disassemble(bytes_of(std::string("\x8a\x09\x00\x00\x00\x00\x00\x00\x00\x00\x01.", 12)));
    CHECK(big.opcodes[0].arg.kind == OpArg::Kind::kBigInt);
    CHECK(big.opcodes[0].arg.data == "18446744073709551616");
  }
  SUBCASE("protocol 0 booleans and floats") {
    const auto p = disassemble(bytes_of("I01\nI00\nI-7\nF0.25\n."));
    CHECK(p.opcodes[0].arg == OpArg::of_bool(true));
    CHECK(p.opcodes[1].arg == OpArg::of_bool(false));
    CHECK(p.opcodes[2].arg.integer == -7);
    CHECK(p.opcodes[3].arg.real == 0.25);
  }
  SUBCASE("binfloat is big-endian") {
    const auto p = disassemble(bytes_of(std::string("G\x3f\xf0\x00\x00\x00\x00\x00\x00.", 10)));
    CHECK(p.opcodes[0].arg.real == 1.0);
  }
  SUBCASE("memo helpers pick the narrow form when it fits") {
    CHECK(make_put(255).mnemonic() == "BINPUT");
    CHECK(make_put(256).mnemonic() == "LONG_BINPUT");
    CHECK(make_get(7).raw_arg == Bytes{7});
    CHECK(with_memo_index(make_opcode("PUT", OpArg::of_int(3)), 12).raw_arg == bytes_of("12\n"));
  }
}

TEST_CASE("python repr helpers") {
  CHECK(python_str_repr("abc") == "'abc'");
  CHECK(python_str_repr("it's") == "\"it's\"");
  CHECK(python_str_repr("both ' and \"") == "'both \\' and \"'");
  CHECK(python_str_repr("a\nb\tc\x01") == "'a\\nb\\tc\\x01'");
  CHECK(python_str_repr("caf\xc3\xa9") == "'caf\xc3\xa9'");
  CHECK(python_bytes_repr(std::string("\x00\xff'", 3)) == "b\"\\x00\\xff'\"");
}

TEST_CASE("extract_imports") {
  SUBCASE("STACK_GLOBAL resolved from string pushes") {
    const auto imports = extract_imports(disassemble(panel("benign_tensor_class")));
    const bool has_tensor = std::any_of(imports.begin(), imports.end(), [](const ImportRef& r) {
      return r.module == "torch" && r.name == "Tensor" && r.via == "STACK_GLOBAL" && r.resolved;
    });
    CHECK(has_tensor);
  }
  SUBCASE("GLOBAL split on the space") {
    const auto imports = extract_imports(disassemble(panel("pypi_execute_both")));
    REQUIRE(imports.size() == 1);
    CHECK(imports[0].module == "execute");
    CHECK(imports[0].name == "both");
    CHECK(imports[0].position == 2);
  }
  SUBCASE("no imports") {
    CHECK(extract_imports(disassemble(bytes_of("\x80\x02}."))).empty());
  }
  SUBCASE("non-constant operands are flagged unresolved") {
    // STACK_GLOBAL over a tuple and a str cannot be resolved statically.
    const auto imports = extract_imports(disassemble(bytes_of(")\x8c\x01x\x93.")));
    REQUIRE(imports.size() == 1);
    CHECK_FALSE(imports[0].resolved);
  }
}

TEST_CASE("static_features counts mnemonics") {
  const FeatureMap minimal = static_features(disassemble(bytes_of("\x80\x02.")));
  CHECK(minimal == FeatureMap{{"op::PROTO", 1}, {"op::STOP", 1}});

  const PickleProgram malhug = disassemble(panel("malhug_eval"));
  const FeatureMap f = static_features(malhug);
  CHECK(f.at("op::GLOBAL") >= 1);
  CHECK(f.at("op::REDUCE") >= 1);
  for (const auto& [name, data] : host_streams()) {
    const PickleProgram p = disassemble(data);
    std::map<std::string, double> brute;
    for (const auto& op : p.opcodes) brute["op::" + std::string(op.mnemonic())] += 1;
    const FeatureMap sf = static_features(p);
    CHECK(sf == FeatureMap(brute.begin(), brute.end()));
    double total = 0;
    for (const auto& [k, v] : sf) total += v;
    CHECK(total == doctest::Approx(static_cast<double>(p.opcodes.size())));
  }
}

TEST_CASE("validate") {
  SUBCASE("empty dict") {
    const auto r = validate(bytes_of("\x80\x02}."));
    CHECK(r.success);
    CHECK(r.calls.empty());
  }
  SUBCASE("MalHug panel records the eval call") {
    const auto r = validate(panel("malhug_eval"));
    CHECK(r.success);
    REQUIRE(r.calls.size() == 1);
    CHECK(r.calls[0].callable == "__builtin__ eval");
    CHECK(r.calls[0].nargs == 1);
    CHECK(r.calls[0].position == 160);
  }
  SUBCASE("every host validates") {
    for (const auto& [name, data] : host_streams()) {
      const auto r = validate(data);
      CHECK_MESSAGE(r.success, name << ": " << (r.failures.empty() ? "" : r.failures[0]));
      CHECK(r.memo_collisions.empty());
    }
  }
  SUBCASE("structural failures are reported, not thrown") {
    CHECK_FALSE(validate(bytes_of("\x80\x02R.")).success);                // underflow
    CHECK_FALSE(validate(bytes_of("\x80\x02h\x05.")).success);            // undefined memo
    CHECK_FALSE(validate(bytes_of("\x80\x02N")).success);                 // no STOP
    CHECK_FALSE(validate(bytes_of("\x80\x02cos\nsystem\nNR.")).success);  // args not a tuple
    CHECK_FALSE(validate(bytes_of("\x80\x02\xff")).success);              // undecodable
    CHECK_FALSE(validate(Bytes{}).success);
  }
  SUBCASE("memo redefinition is a finding") {
    const auto r = validate(bytes_of("\x80\x02Nq\x00Nq\x00\x86."));
    CHECK(r.success);
    REQUIRE(r.memo_collisions.size() == 1);
    CHECK(r.memo_collisions[0].index == 0);
    CHECK(r.memo_collisions[0].first_position == 3);
    CHECK(r.memo_collisions[0].position == 6);
  }
}

TEST_CASE("payload checks") {
  CHECK_NOTHROW(make_payload("ok", bytes_of("cos\nsystem\nX\x02\x00\x00\x00id\x85R")));
  CHECK_THROWS_AS(make_payload("no_reduce", bytes_of("cos\nsystem\n")), InvalidPayload);
  CHECK_THROWS_AS(make_payload("no_import", bytes_of("N)R")), InvalidPayload);
  CHECK_THROWS_AS(make_payload("has_stop", bytes_of("cos\nsystem\n)R.")), InvalidPayload);
  CHECK_THROWS_AS(make_payload("two_values", bytes_of("cos\nsystem\n)RN")), InvalidPayload);
  CHECK_THROWS_AS(make_payload("open_mark", bytes_of("(cos\nsystem\n)R")), InvalidPayload);
}

TEST_CASE("payload library") {
  const auto lib = load_payload_library(kPayloads);
  REQUIRE(lib.size() == 20);
  CHECK(std::is_sorted(lib.begin(), lib.end(),
                       [](const auto& a, const auto& b) { return a.name < b.name; }));
  const auto it = std::find_if(lib.begin(), lib.end(),
                               [](const auto& p) { return p.name == "time_sleep"; });
  REQUIRE(it != lib.end());
  CHECK(it->blocking);

  const fs::path tmp = fs::temp_directory_path() / "mw_payload_roundtrip";
  fs::remove_all(tmp);
  save_payload(tmp, lib.front());
  const auto back = load_payload_library(tmp);
  REQUIRE(back.size() == 1);
  CHECK(back[0].name == lib.front().name);
  CHECK(assemble(back[0].opcodes) == assemble(lib.front().opcodes));
  fs::remove_all(tmp);
}

TEST_CASE("inject into a minimal host") {
  const auto payload = make_payload("eval", bytes_of("c__builtin__\neval\nX\x04\x00\x00\x00" "1+1\n\x85R"));
  const Bytes host = bytes_of("\x80\x02}.");
  const InjectionResult r = inject_detailed(host, payload);
  const PickleProgram out = disassemble(r.bytes);
  CHECK(out.ends_with_stop);
  CHECK(r.splice_offset == 2);
  const auto calls = validate(r.bytes).calls;
  REQUIRE(calls.size() == 1);
  CHECK(calls[0].callable == "__builtin__ eval");
  const auto imports = extract_imports(out);
  REQUIRE(imports.size() == 1);
  CHECK(imports[0].qualified() == "__builtin__ eval");
}

TEST_CASE("inject errors") {
  const auto payload = load_payload(kPayloads / "os_system.pkl");
  CHECK_THROWS_AS(inject(bytes_of("\x80\x02}"), payload), HostParseFailure);
  CHECK_THROWS_AS(inject(bytes_of("\x80\x02\xff."), payload), HostParseFailure);
  // Host already uses the largest 4-byte memo index.
  CHECK_THROWS_AS(inject(bytes_of("\x80\x02}r\xff\xff\xff\xff."), payload), RemapOverflow);
  // A payload without memo traffic needs no remap and still fits.
  const auto plain = load_payload(kPayloads / "builtins_exec.pkl");
  CHECK(validate(inject(bytes_of("\x80\x02}r\xff\xff\xff\xff."), plain)).success);
}

TEST_CASE("campaign: every payload into every host") {
  const auto payloads = load_payload_library(kPayloads);
  const auto hosts = host_streams();
  REQUIRE(hosts.size() >= 10);
  std::size_t pairs = 0;
  for (const auto& payload : payloads) {
    Bytes standalone = bytes_of("\x80\x05");
    const Bytes body = assemble(payload.opcodes);
    standalone.insert(standalone.end(), body.begin(), body.end());
    standalone.push_back('.');
    const auto alone = validate(standalone);
    REQUIRE_MESSAGE(alone.success, payload.name);
    REQUIRE_FALSE(alone.calls.empty());

    for (const auto& [host_name, host] : hosts) {
      INFO(payload.name << " -> " << host_name);
      const InjectionResult r = inject_detailed(host, payload);
      const PickleProgram hp = disassemble(host);
      const PickleProgram out = disassemble(r.bytes);
      CHECK(out.ends_with_stop);
      CHECK(assemble(out.opcodes) == r.bytes);

      const auto report = validate(r.bytes);
      CHECK(report.success);
      CHECK(report.memo_collisions.empty());
      // Recorded calls of the payload alone reappear in the injected program.
      for (const auto& c : alone.calls) {
        const bool found = std::any_of(report.calls.begin(), report.calls.end(),
                                       [&](const RecordedCall& rc) {
                                         return rc.callable == c.callable &&
                                                rc.nargs == c.nargs && rc.via == c.via;
                                       });
        CHECK_MESSAGE(found, c.callable);
      }
      // Host bytes are untouched outside the splice.
      CHECK(std::equal(host.begin(), host.begin() + r.splice_offset, r.bytes.begin()));
      CHECK(std::equal(host.begin() + r.splice_offset, host.end(),
                       r.bytes.begin() + r.splice_offset + r.splice_length));
      // Payload memo keys are disjoint from the host's.
      if (!r.implicit_memo_host) {
        const auto host_keys = memo_writes(hp);
        for (const auto& op : out.opcodes) {
          if (op.position >= r.splice_offset && op.position < r.splice_offset + r.splice_length &&
              is_put(op)) {
            CHECK(host_keys.count(memo_index(op)) == 0);
            CHECK(memo_index(op) >= r.remap.offset);
          }
        }
      }
      ++pairs;
    }
  }
  CHECK(pairs >= 200);
}

TEST_CASE("zip containers") {
  for (const auto& name : {"torch_zip_stored.pt", "torch_zip_deflated.pt"}) {
    const Bytes raw = read_file_bytes(kFixtures / "hosts" / name);
    const PickleArtifact a = open_artifact(raw);
    REQUIRE(a.in_archive());
    CHECK(a.member_name() == "archive/data.pkl");
    CHECK(a.archive.size() == 3);
    const Bytes rebuilt = rebuild_artifact(a, a.pickle);
    const PickleArtifact b = open_artifact(rebuilt);
    CHECK(b.pickle == a.pickle);
    CHECK(b.archive[1].data == a.archive[1].data);
    CHECK(b.archive[1].method == a.archive[1].method);

    const auto payload = load_payload(kPayloads / "os_system.pkl");
    const Bytes injected = rebuild_artifact(a, inject(a.pickle, payload));
    CHECK(validate(open_artifact(injected).pickle).calls.size() >= 1);
  }
  CHECK_THROWS_AS(read_zip(bytes_of("PK\x03\x04garbage")), BadArchive);
  CHECK_FALSE(open_artifact(bytes_of("\x80\x02}.")).in_archive());
}
