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

#ifndef MODELWARDEN_CORPUS_CORPUS_H_
#define MODELWARDEN_CORPUS_CORPUS_H_

// Local model registry, synthetic trace corpora and injection campaigns.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "modelwarden/baselines/baselines.h"
#include "modelwarden/common/errors.h"
#include "modelwarden/common/io.h"
#include "modelwarden/pickle/inject.h"
#include "modelwarden/trace/trace.h"

namespace modelwarden::corpus {

namespace fs = std::filesystem;

class DuplicateId : public ParseError {
 public:
  explicit DuplicateId(const std::string& id) : ParseError("duplicate id: " + id) {}
};

class MissingMetadata : public ParseError {
 public:
  using ParseError::ParseError;
};

// $MODELWARDEN_HOME, else ~/.modelwarden.
fs::path default_home();

enum class ArtifactKind { kPickle, kTrace, kSummary, kUnknown };
ArtifactKind artifact_kind(const fs::path& path);

struct RegistryEntry {
  std::string id;
  std::string cluster;
  std::int64_t likes = 0;
  std::int64_t downloads = 0;
  std::string last_commit;    // YYYY-MM-DD
  std::string security_flag;  // empty when unflagged
  // One or more paths relative to the registry root, separated by ';'.
  std::string artifact_path;

  bool flagged() const { return !security_flag.empty(); }
  std::vector<std::string> artifacts() const;
};

class Registry {
 public:
  // Reads <dir>/metadata.csv; artifact paths are relative to dir.
  static Registry ingest(const fs::path& dir);
  static Registry parse_metadata(std::string_view csv, const fs::path& root);

  // Metadata CSV, rows ordered by id.
  std::string export_csv() const;
  // Single-file form: "# root: <dir>" followed by the metadata CSV.
  void save(const fs::path& file) const;
  static Registry load(const fs::path& file);

  const std::vector<RegistryEntry>& entries() const { return entries_; }
  const fs::path& root() const { return root_; }
  const RegistryEntry& at(std::string_view id) const;

  // Unflagged entries, optionally restricted to one cluster.
  std::vector<const RegistryEntry*> benign_pool(std::string_view cluster = {}) const;

  std::optional<fs::path> pickle_path(const RegistryEntry& e) const;
  std::optional<fs::path> trace_path(const RegistryEntry& e) const;

 private:
  fs::path root_;
  std::vector<RegistryEntry> entries_;  // sorted by id
};

// Per-syscall count model. The variance-to-mean ratio selects the family:
// 0 gives the mean itself, (0,1) a binomial, 1 a Poisson, > 1 a gamma-Poisson
// mixture, each with the given mean.
struct SyscallRate {
  double mean = 0.0;
  double dispersion = 1.0;
  double phase = 0.5;         // typical relative position in the log, [0,1]
  double thread_share = 0.0;  // probability an occurrence runs on a worker thread
  // Scaled by the per-trace size factor. Interpreter start-up calls are not.
  bool size_coupled = true;
};

struct BenignTraceProfile {
  std::string cluster;
  std::map<std::string, SyscallRate> rates;
  // Log-normal per-trace size factor (mean 1). 0 disables.
  double length_sigma = 0.0;
  // Standard deviation of the ordering jitter around each phase.
  double order_jitter = 0.02;
  // Syscall that starts a worker thread (its retval is the new tid).
  std::string thread_spawn = "clone3";

  static BenignTraceProfile builtin(std::string_view cluster);
  static std::vector<std::string> builtin_clusters();
  void validate() const;
};

std::string profile_to_json(const BenignTraceProfile& p);
BenignTraceProfile profile_from_json(std::string_view text);

// Method-of-moments fit: mean, variance-to-mean ratio and mean relative
// position per syscall over the given logs.
BenignTraceProfile fit_profile(std::string cluster, const std::vector<trace::TraceLog>& logs);

std::uint64_t sample_count(const SyscallRate& rate, double scale, std::mt19937_64& rng);

struct GeneratedTrace {
  trace::SyscallSummary summary;
  trace::TraceLog log;
};

// Sample i draws from its own stream derived from (seed, i).
std::vector<GeneratedTrace> gen_benign_traces(const BenignTraceProfile& profile, std::size_t n,
                                              std::uint64_t seed);
GeneratedTrace gen_benign_trace(const BenignTraceProfile& profile, std::uint64_t stream_seed);

struct MaliciousOverlay {
  std::string name;
  std::map<std::string, std::uint64_t> deltas;
  // Inserted contiguously; its calls are part of deltas.
  std::vector<std::string> fragment;
  bool new_process = false;
  // Corpus origin for samples carrying this overlay and the matching pickle
  // payload, when one exists.
  std::string origin = "injected-malhug";
  std::string payload;
  // The payload blocks until the tracer's deadline kills the loader: the log
  // ends with the fragment, so later benign events and deltas are cut.
  bool stalls = false;

  // Throws Error if deltas are empty/zero, the fragment exceeds them, or a
  // stalling overlay has no fragment.
  void validate() const;
  // True when no delta syscall is on the blacklist.
  bool unseen(const baselines::SyscallBlacklist& bl = baselines::SyscallBlacklist::default_list()) const;
  // At least one delta syscall is absent from the profile or has mean < rare_mean.
  bool has_rare_signature(const BenignTraceProfile& profile, double rare_mean = 1.0) const;
};

const std::vector<MaliciousOverlay>& builtin_overlays();
std::string overlays_to_json(const std::vector<MaliciousOverlay>& overlays);
std::vector<MaliciousOverlay> overlays_from_json(std::string_view text);

// Inserts the overlay's calls at seeded random positions; the fragment stays
// contiguous. Calls go to the first pid of the log, or to a fresh pid when
// the overlay runs in a new process.
trace::TraceLog apply_overlay(const trace::TraceLog& benign, const MaliciousOverlay& overlay,
                              std::uint64_t seed);

// Labeled synthetic dataset.
struct CorpusSample {
  std::string id;
  std::string cluster;
  bool malicious = false;
  std::string origin;   // benign, real, injected-malhug, injected-pypi
  std::string overlay;  // empty for benign
  trace::TraceLog log;
  std::optional<Bytes> pickle;  // present when hosts were supplied
};

struct CorpusSpec {
  std::string cluster = "text-generation";
  std::size_t benign = 2000;
  std::size_t real = 25;
  std::size_t injected = 375;
  std::uint64_t seed = 42;
  std::optional<BenignTraceProfile> profile;             // builtin for the cluster if unset
  std::vector<MaliciousOverlay> overlays;                // builtin if empty
  // Overlays used for real-style samples; those with blacklisted calls if empty.
  std::vector<std::string> real_overlays;
  // Optional pickle hosts and payloads; benign samples reuse hosts
  // round-robin and malicious ones carry the overlay's payload.
  std::vector<std::pair<std::string, Bytes>> hosts;
  std::vector<pickle::InjectionPayload> payloads;
};

std::vector<CorpusSample> generate_corpus(const CorpusSpec& spec);

// <dir>/samples.csv (id,cluster,label,origin,overlay,trace_path,pickle_path)
// plus traces/<id>.strace and pickles/<id>.pkl.
void write_corpus(const fs::path& dir, const std::vector<CorpusSample>& samples);
std::vector<CorpusSample> read_corpus(const fs::path& dir);

struct CampaignHost {
  std::string id;
  Bytes artifact;  // bare pickle or zip container
};

struct CampaignOptions {
  // Blocking payloads stall a real loader until the deadline; they are
  // reported as timed out and the campaign moves on.
  double timeout_s = 30.0;
  std::size_t jobs = 1;
  std::optional<fs::path> out_dir;  // injected artifacts, <host>__<payload><ext>
  std::uint64_t seed = 42;
};

struct CampaignRow {
  std::string host_id;
  std::string payload;
  bool valid = false;
  std::vector<std::string> recorded_calls;
  bool timed_out = false;
  std::uint64_t duration_ms = 0;  // simulated loader time
  std::string error;
};

std::vector<CampaignRow> run_injection_campaign(const std::vector<CampaignHost>& hosts,
                                                const std::vector<pickle::InjectionPayload>& payloads,
                                                const CampaignOptions& options = {});
// host_id,payload,valid,recorded_calls,timed_out,duration_ms
std::string campaign_csv(const std::vector<CampaignRow>& rows);

// Runs `command` under strace -f and returns the raw log. Throws Error when
// no tracer is available.
bool tracer_available();
std::string trace_command(const std::string& command, const fs::path& scratch_dir);

}  // namespace modelwarden::corpus

#endif  // MODELWARDEN_CORPUS_CORPUS_H_
