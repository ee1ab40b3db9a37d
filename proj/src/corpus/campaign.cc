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
#include <cmath>
#include <cstdlib>

#include "modelwarden/common/parallel.h"
#include "modelwarden/corpus/corpus.h"
#include "modelwarden/pickle/container.h"
#include "modelwarden/pickle/machine.h"

namespace modelwarden::corpus {

namespace {

// Calls the payload makes when run on its own.
std::vector<pickle::RecordedCall> standalone_calls(const pickle::InjectionPayload& payload) {
  Bytes program{0x80, 0x05};
  const Bytes body = pickle::assemble(payload.opcodes);
  program.insert(program.end(), body.begin(), body.end());
  program.push_back('.');
  return pickle::validate(program).calls;
}

std::string safe_name(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  }
  return out;
}

}  // namespace

std::vector<CampaignRow> run_injection_campaign(const std::vector<CampaignHost>& hosts,
                                                const std::vector<pickle::InjectionPayload>& payloads,
                                                const CampaignOptions& options) {
  std::vector<std::vector<pickle::RecordedCall>> expected;
  expected.reserve(payloads.size());
  for (const auto& p : payloads) expected.push_back(standalone_calls(p));
  if (options.out_dir) fs::create_directories(*options.out_dir);

  const auto timeout_ms = static_cast<std::uint64_t>(std::llround(std::max(0.0, options.timeout_s) * 1000));
  std::vector<CampaignRow> rows(hosts.size() * payloads.size());
  parallel_for(rows.size(), options.jobs, [&](std::size_t k) {
    const auto& host = hosts[k / payloads.size()];
    const auto& payload = payloads[k % payloads.size()];
    CampaignRow& row = rows[k];
    row.host_id = host.id;
    row.payload = payload.name;
    try {
      const auto artifact = pickle::open_artifact(host.artifact);
      const Bytes stream = pickle::inject(artifact.pickle, payload);
      if (options.out_dir) {
        const std::string ext = artifact.in_archive() ? ".pt" : ".pkl";
        write_file_bytes(*options.out_dir / (safe_name(host.id) + "__" + safe_name(payload.name) + ext),
                         pickle::rebuild_artifact(artifact, stream));
      }
      const auto report = pickle::validate(stream);
      for (const auto& c : report.calls) row.recorded_calls.push_back(c.callable);
      const bool calls_present = std::all_of(
          expected[k % payloads.size()].begin(), expected[k % payloads.size()].end(),
          [&](const pickle::RecordedCall& want) {
            return std::any_of(report.calls.begin(), report.calls.end(), [&](const pickle::RecordedCall& c) {
              return c.callable == want.callable && c.nargs == want.nargs && c.via == want.via;
            });
          });
      row.valid = report.success && report.memo_collisions.empty() && calls_present;
      if (!report.success) {
        row.error = report.failures.empty() ? "validation failed" : report.failures.front();
      } else if (!report.memo_collisions.empty()) {
        row.error = "memo collision at index " + std::to_string(report.memo_collisions.front().index);
      } else if (!calls_present) {
        row.error = "payload call missing from injected program";
      }
    } catch (const std::exception& e) {
      row.valid = false;
      row.error = e.what();
    }
    // Nothing is executed; a blocking payload would hold the loader until
    // the deadline, so its simulated load always ends there.
    if (payload.blocking) {
      row.timed_out = true;
      row.duration_ms = timeout_ms;
    }
  });
  return rows;
}

std::string campaign_csv(const std::vector<CampaignRow>& rows) {
  std::string out = "host_id,payload,valid,recorded_calls,timed_out,duration_ms\n";
  for (const auto& r : rows) {
    std::string calls;
    for (const auto& c : r.recorded_calls) calls += (calls.empty() ? "" : ";") + c;
    out += join_csv_row({r.host_id, r.payload, r.valid ? "true" : "false", calls,
                         r.timed_out ? "true" : "false", std::to_string(r.duration_ms)}) +
           "\n";
  }
  return out;
}

bool tracer_available() {
  const char* path = std::getenv("PATH");
  if (!path) return false;
  for (const auto& dir : split(path, ':')) {
    if (!dir.empty() && fs::exists(fs::path(dir) / "strace")) return true;
  }
  return false;
}

std::string trace_command(const std::string& command, const fs::path& scratch_dir) {
  if (!tracer_available()) throw Error("strace not found on PATH");
  fs::create_directories(scratch_dir);
  const fs::path log = scratch_dir / "trace.strace";
  std::string quoted = "'";
  for (char c : command) quoted += c == '\'' ? std::string("'\\''") : std::string(1, c);
  quoted += "'";
  const std::string cmd = "strace -f -qq -o '" + log.string() + "' -- sh -c " + quoted;
  const int status = std::system(cmd.c_str());
  if (status == -1 || !fs::exists(log)) throw Error("tracer did not run: " + cmd);
  return read_file_text(log);
}

}  // namespace modelwarden::corpus
