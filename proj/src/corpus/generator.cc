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
#include <numeric>
#include <set>

#include "json.hpp"
#include "modelwarden/corpus/corpus.h"
#include "modelwarden/pickle/container.h"

namespace modelwarden::corpus {

namespace {

using nlohmann::json;

// Default loader profile: a Python process deserializing a PyTorch
// checkpoint, traced from the start of the load call. Our numbers; the
// published work does not give per-syscall rates.
const std::map<std::string, SyscallRate>& base_rates() {
  static const std::map<std::string, SyscallRate> rates = {
      {"rt_sigaction", {68, 0, 0.05, 0.0, false}},
      {"prlimit64", {1, 0, 0.03, 0.0, false}},
      {"uname", {2, 0, 0.04, 0.0, false}},
      {"getrandom", {2, 0, 0.06, 0.0, false}},
      {"getcwd", {2, 0, 0.08, 0.0, false}},
      {"readlink", {0.3, 1.0, 0.09, 0.0}},
      {"ioctl", {12, 0.3, 0.10, 0.0, false}},
      {"getdents64", {10, 1.2, 0.15, 0.0}},
      {"newfstatat", {210, 1.5, 0.18, 0.0}},
      {"openat", {140, 1.5, 0.20, 0.0}},
      {"close", {138, 1.5, 0.22, 0.0}},
      {"fcntl", {6, 0.5, 0.24, 0.0, false}},
      {"pread64", {22, 1.5, 0.26, 0.0}},
      {"read", {260, 2.0, 0.30, 0.0}},
      {"dup", {2, 0, 0.31, 0.0, false}},
      {"lseek", {48, 2.0, 0.35, 0.0}},
      {"mmap", {160, 2.0, 0.40, 0.1}},
      {"mprotect", {60, 1.5, 0.42, 0.1}},
      {"sysinfo", {1, 0, 0.45, 0.0, false}},
      {"sched_getaffinity", {3, 0, 0.46, 0.0, false}},
      {"clone3", {6, 1.5, 0.48, 0.0}},
      {"set_robust_list", {6, 1.5, 0.49, 1.0}},
      {"rseq", {6, 1.5, 0.495, 1.0}},
      {"brk", {45, 2.0, 0.50, 0.0}},
      {"getpid", {3, 0, 0.52, 0.0, false}},
      {"munmap", {40, 2.0, 0.55, 0.2}},
      {"rt_sigprocmask", {8, 0.3, 0.60, 0.5, false}},
      {"futex", {35, 4.0, 0.70, 0.8}},
      {"sched_yield", {4, 4.0, 0.72, 0.9}},
      {"madvise", {8, 2.0, 0.75, 0.3}},
      {"write", {3, 0.3, 0.90, 0.0, false}},
      {"exit_group", {1, 0, 1.00, 0.0, false}},
  };
  return rates;
}

const std::map<std::string, std::map<std::string, double>>& cluster_multipliers() {
  static const std::map<std::string, std::map<std::string, double>> m = {
      {"text-generation",
       {{"mmap", 1.4}, {"read", 1.3}, {"munmap", 1.2}, {"futex", 1.3}, {"madvise", 1.5}}},
      {"text-classification", {{"openat", 1.2}, {"newfstatat", 1.1}, {"lseek", 1.3}, {"close", 1.2}}},
      {"feature-extraction", {{"mprotect", 0.9}, {"clone3", 1.5}, {"set_robust_list", 1.5},
                              {"rseq", 1.5}, {"futex", 1.6}}},
  };
  return m;
}

std::vector<std::int64_t> pids_in_order(const std::vector<trace::RawTraceEvent>& events) {
  std::vector<std::int64_t> pids;
  std::set<std::int64_t> seen;
  for (const auto& e : events) {
    if (seen.insert(e.pid).second) pids.push_back(e.pid);
  }
  return pids;
}

trace::RawTraceEvent make_event(std::int64_t pid, const std::string& name, std::string retval = "0") {
  trace::RawTraceEvent e;
  e.pid = pid;
  e.syscall = name;
  e.retval = std::move(retval);
  return e;
}

}  // namespace

BenignTraceProfile BenignTraceProfile::builtin(std::string_view cluster) {
  const auto& mult = cluster_multipliers();
  const auto it = mult.find(std::string(cluster));
  if (it == mult.end()) throw Error("no builtin profile for cluster '" + std::string(cluster) + "'");
  BenignTraceProfile p;
  p.cluster = std::string(cluster);
  p.rates = base_rates();
  for (const auto& [name, factor] : it->second) p.rates.at(name).mean *= factor;
  p.length_sigma = 0.15;
  return p;
}

std::vector<std::string> BenignTraceProfile::builtin_clusters() {
  std::vector<std::string> out;
  for (const auto& [name, _] : cluster_multipliers()) out.push_back(name);
  return out;
}

void BenignTraceProfile::validate() const {
  for (const auto& [name, r] : rates) {
    if (!trace::is_syscall_name(name)) throw Error("profile: bad syscall name '" + name + "'");
    if (!(r.mean >= 0) || !std::isfinite(r.mean)) throw Error("profile: negative mean for " + name);
    if (!(r.dispersion >= 0) || !std::isfinite(r.dispersion)) {
      throw Error("profile: negative dispersion for " + name);
    }
    if (!(r.thread_share >= 0 && r.thread_share <= 1)) {
      throw Error("profile: thread_share outside [0,1] for " + name);
    }
  }
  if (!(length_sigma >= 0) || !(order_jitter >= 0)) throw Error("profile: negative spread");
}

std::string profile_to_json(const BenignTraceProfile& p) {
  json rates = json::object();
  for (const auto& [name, r] : p.rates) {
    rates[name] = {{"mean", r.mean},
                   {"dispersion", r.dispersion},
                   {"phase", r.phase},
                   {"thread_share", r.thread_share},
                   {"size_coupled", r.size_coupled}};
  }
  const json j = {{"cluster", p.cluster},
                  {"length_sigma", p.length_sigma},
                  {"order_jitter", p.order_jitter},
                  {"thread_spawn", p.thread_spawn},
                  {"rates", rates}};
  return j.dump(2) + "\n";
}

BenignTraceProfile profile_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    BenignTraceProfile p;
    p.cluster = j.at("cluster").get<std::string>();
    p.length_sigma = j.value("length_sigma", 0.0);
    p.order_jitter = j.value("order_jitter", 0.02);
    p.thread_spawn = j.value("thread_spawn", std::string("clone3"));
    for (const auto& [name, r] : j.at("rates").items()) {
      p.rates[name] = {r.at("mean").get<double>(), r.value("dispersion", 1.0),
                       r.value("phase", 0.5), r.value("thread_share", 0.0),
                       r.value("size_coupled", true)};
    }
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad profile JSON: ") + e.what());
  }
}

BenignTraceProfile fit_profile(std::string cluster, const std::vector<trace::TraceLog>& logs) {
  if (logs.empty()) throw Error("fit_profile needs at least one log");
  BenignTraceProfile p;
  p.cluster = std::move(cluster);
  std::map<std::string, std::vector<double>> counts;
  std::map<std::string, std::pair<double, std::size_t>> positions;
  for (const auto& log : logs) {
    for (const auto& [name, c] : trace::summarize(log).counts) counts[name];
    const double len = static_cast<double>(log.events.size());
    for (std::size_t i = 0; i < log.events.size(); ++i) {
      auto& [sum, n] = positions[log.events[i].syscall];
      sum += len > 1 ? static_cast<double>(i) / (len - 1) : 0.0;
      ++n;
    }
  }
  for (const auto& log : logs) {
    const auto s = trace::summarize(log);
    for (auto& [name, v] : counts) {
      const auto it = s.counts.find(name);
      v.push_back(it == s.counts.end() ? 0.0 : static_cast<double>(it->second));
    }
  }
  for (const auto& [name, v] : counts) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= n;
    SyscallRate r;
    r.mean = mean;
    r.dispersion = mean > 0 ? var / mean : 0.0;
    r.size_coupled = var > 0;
    const auto& [sum, k] = positions.at(name);
    r.phase = sum / static_cast<double>(k);
    p.rates[name] = r;
  }
  return p;
}

std::uint64_t sample_count(const SyscallRate& rate, double scale, std::mt19937_64& rng) {
  const double mu = rate.mean * scale;
  if (!(mu > 0)) return 0;
  const double d = rate.dispersion;
  if (d == 0) {
    const double whole = std::floor(mu);
    const double frac = mu - whole;
    std::uint64_t c = static_cast<std::uint64_t>(whole);
    if (frac > 0 && std::uniform_real_distribution<double>(0, 1)(rng) < frac) ++c;
    return c;
  }
  if (d < 1) {
    const double p = 1 - d;
    const auto trials = std::max<std::int64_t>(1, std::llround(mu / p));
    const double q = std::min(1.0, mu / static_cast<double>(trials));
    return static_cast<std::uint64_t>(std::binomial_distribution<std::int64_t>(trials, q)(rng));
  }
  double lambda = mu;
  if (d > 1) lambda = std::gamma_distribution<double>(mu / (d - 1), d - 1)(rng);
  if (!(lambda > 0)) return 0;
  return static_cast<std::uint64_t>(std::poisson_distribution<std::int64_t>(lambda)(rng));
}

GeneratedTrace gen_benign_trace(const BenignTraceProfile& profile, std::uint64_t stream_seed) {
  std::mt19937_64 rng(stream_seed);
  double scale = 1.0;
  if (profile.length_sigma > 0) {
    const double s = profile.length_sigma;
    scale = std::exp(std::normal_distribution<double>(-s * s / 2, s)(rng));
  }
  struct Slot {
    double key;
    const std::string* name;
    double share;
  };
  std::vector<Slot> slots;
  std::normal_distribution<double> jitter(0.0, profile.order_jitter > 0 ? profile.order_jitter : 1.0);
  for (const auto& [name, rate] : profile.rates) {
    const std::uint64_t c = sample_count(rate, rate.size_coupled ? scale : 1.0, rng);
    for (std::uint64_t k = 0; k < c; ++k) {
      const double key = rate.phase + (profile.order_jitter > 0 ? jitter(rng) : 0.0);
      slots.push_back({key, &name, rate.thread_share});
    }
  }
  std::stable_sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) { return a.key < b.key; });

  GeneratedTrace out;
  const std::int64_t main_pid = 1000 + static_cast<std::int64_t>(rng() % 60000);
  std::int64_t next_tid = main_pid + 1;
  std::vector<std::int64_t> threads;
  std::uniform_real_distribution<double> unit(0, 1);
  for (const auto& s : slots) {
    std::int64_t pid = main_pid;
    if (s.share > 0 && !threads.empty() && unit(rng) < s.share) {
      pid = threads[static_cast<std::size_t>(rng() % threads.size())];
    }
    std::string retval = "0";
    if (*s.name == profile.thread_spawn && pid == main_pid) {
      threads.push_back(next_tid);
      retval = std::to_string(next_tid++);
    }
    out.log.events.push_back(make_event(pid, *s.name, std::move(retval)));
  }
  out.log.pids = pids_in_order(out.log.events);
  out.summary = trace::summarize(out.log);
  return out;
}

std::vector<GeneratedTrace> gen_benign_traces(const BenignTraceProfile& profile, std::size_t n,
                                              std::uint64_t seed) {
  if (n == 0) throw Error("gen_benign_traces needs n >= 1");
  profile.validate();
  std::vector<GeneratedTrace> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(gen_benign_trace(profile, derive_seed(seed, "benign:" + std::to_string(i))));
  }
  return out;
}

void MaliciousOverlay::validate() const {
  if (deltas.empty()) throw Error("overlay '" + name + "' has no deltas");
  for (const auto& [call, count] : deltas) {
    if (count == 0) throw Error("overlay '" + name + "': zero delta for " + call);
    if (!trace::is_syscall_name(call)) throw Error("overlay '" + name + "': bad syscall " + call);
  }
  std::map<std::string, std::uint64_t> used;
  for (const auto& call : fragment) {
    const auto it = deltas.find(call);
    if (it == deltas.end() || ++used[call] > it->second) {
      throw Error("overlay '" + name + "': fragment call " + call + " exceeds its delta");
    }
  }
  if (stalls && fragment.empty()) throw Error("overlay '" + name + "' stalls but has no fragment");
}

bool MaliciousOverlay::unseen(const baselines::SyscallBlacklist& bl) const {
  return std::none_of(deltas.begin(), deltas.end(), [&](const auto& d) { return bl.contains(d.first); });
}

bool MaliciousOverlay::has_rare_signature(const BenignTraceProfile& profile, double rare_mean) const {
  return std::any_of(deltas.begin(), deltas.end(), [&](const auto& d) {
    const auto it = profile.rates.find(d.first);
    return it == profile.rates.end() || it->second.mean < rare_mean;
  });
}

const std::vector<MaliciousOverlay>& builtin_overlays() {
  // Calls a freshly exec'd helper process makes before doing its job.
  const std::map<std::string, std::uint64_t> exec_bulk = {
      {"brk", 3},       {"arch_prctl", 1}, {"access", 2},     {"openat", 10},
      {"newfstatat", 6}, {"mmap", 20},     {"close", 10},     {"read", 12},
      {"mprotect", 6},  {"set_tid_address", 1}, {"rt_sigaction", 8}, {"prlimit64", 1}};
  auto with = [](std::map<std::string, std::uint64_t> base,
                 std::initializer_list<std::pair<const std::string, std::uint64_t>> extra) {
    for (const auto& [k, v] : extra) base[k] += v;
    return base;
  };
  static const std::vector<MaliciousOverlay> overlays = {
      {"reverse_shell",
       with(exec_bulk, {{"socket", 1}, {"connect", 1}, {"dup2", 3}, {"execve", 1}, {"clone", 1}, {"wait4", 1}}),
       {"socket", "connect", "dup2", "dup2", "dup2", "execve"},
       true,
       "injected-malhug",
       "socket_create_connection"},
      {"shell_command",
       with(exec_bulk, {{"clone", 1}, {"execve", 2}, {"wait4", 1}}),
       {"clone", "execve", "wait4"},
       true,
       "injected-malhug",
       "os_system"},
      {"subprocess_capture",
       with(exec_bulk, {{"pipe2", 1}, {"clone", 1}, {"execve", 1}, {"wait4", 1}, {"read", 4}}),
       {"pipe2", "clone", "execve", "read", "wait4"},
       true,
       "injected-malhug",
       "subprocess_check_output"},
      {"chmod_dropper",
       {{"openat", 2}, {"write", 5}, {"close", 2}, {"chmod", 1}},
       {"openat", "write", "close", "chmod"},
       false,
       "injected-malhug",
       "builtins_exec"},
      {"dns_exfil",
       {{"socket", 1}, {"sendto", 4}, {"recvfrom", 4}, {"poll", 4}, {"openat", 2}, {"read", 2}, {"close", 3}},
       {"socket", "sendto", "poll", "recvfrom"},
       false,
       "injected-pypi",
       "urllib_urlopen"},
      {"credential_harvest",
       {{"faccessat2", 6}, {"getdents64", 6}, {"openat", 18}, {"read", 30}, {"close", 18}, {"newfstatat", 14}},
       {"faccessat2", "getdents64", "openat", "read", "close"},
       false,
       "injected-pypi",
       "runpy_run_path"},
      {"memfd_loader",
       {{"memfd_create", 1}, {"ftruncate", 1}, {"write", 6}, {"mmap", 3}, {"mprotect", 2}},
       {"memfd_create", "ftruncate", "write", "mmap"},
       false,
       "injected-pypi",
       "importlib_import_module"},
      {"sleeper",
       {{"clock_nanosleep", 3}, {"getpid", 1}},
       {"clock_nanosleep", "clock_nanosleep", "clock_nanosleep"},
       false,
       "injected-pypi",
       "time_sleep",
       true},
      {"file_wiper",
       {{"getdents64", 4}, {"unlinkat", 12}, {"newfstatat", 8}, {"openat", 4}, {"close", 4}},
       {"getdents64", "unlinkat", "unlinkat"},
       false,
       "injected-pypi",
       "shutil_rmtree"},
      // Mostly extra imports: visible in counts, barely in presence.
      {"import_storm",
       {{"openat", 110}, {"read", 160}, {"newfstatat", 330}, {"close", 110}, {"mmap", 40}, {"readlink", 2},
        {"lseek", 30}, {"getdents64", 12}},
       {},
       false,
       "injected-pypi",
       "getattr_import_chain"},
  };
  return overlays;
}

std::string overlays_to_json(const std::vector<MaliciousOverlay>& overlays) {
  json arr = json::array();
  for (const auto& o : overlays) {
    arr.push_back({{"name", o.name},
                   {"deltas", o.deltas},
                   {"fragment", o.fragment},
                   {"new_process", o.new_process},
                   {"stalls", o.stalls},
                   {"origin", o.origin},
                   {"payload", o.payload}});
  }
  return arr.dump(2) + "\n";
}

std::vector<MaliciousOverlay> overlays_from_json(std::string_view text) {
  try {
    std::vector<MaliciousOverlay> out;
    for (const auto& j : json::parse(text)) {
      MaliciousOverlay o;
      o.name = j.at("name").get<std::string>();
      o.deltas = j.at("deltas").get<std::map<std::string, std::uint64_t>>();
      o.fragment = j.value("fragment", std::vector<std::string>{});
      o.new_process = j.value("new_process", false);
      o.stalls = j.value("stalls", false);
      o.origin = j.value("origin", std::string("injected-malhug"));
      o.payload = j.value("payload", std::string());
      o.validate();
      out.push_back(std::move(o));
    }
    return out;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad overlay JSON: ") + e.what());
  }
}

trace::TraceLog apply_overlay(const trace::TraceLog& benign, const MaliciousOverlay& overlay,
                              std::uint64_t seed) {
  overlay.validate();
  std::mt19937_64 rng(seed);
  trace::TraceLog out = benign;
  std::int64_t pid = benign.events.empty() ? 1 : benign.events.front().pid;
  if (overlay.new_process) {
    std::int64_t top = 1;
    for (const auto& e : benign.events) top = std::max(top, e.pid);
    pid = top + 1;
  }
  auto& events = out.events;
  auto position = [&] {
    return static_cast<std::ptrdiff_t>(
        std::uniform_int_distribution<std::size_t>(0, events.size())(rng));
  };
  std::map<std::string, std::uint64_t> singles = overlay.deltas;
  for (const auto& call : overlay.fragment) --singles[call];
  for (const auto& [call, count] : singles) {
    for (std::uint64_t k = 0; k < count; ++k) events.insert(events.begin() + position(), make_event(pid, call));
  }
  if (!overlay.fragment.empty()) {
    std::vector<trace::RawTraceEvent> block;
    for (const auto& call : overlay.fragment) block.push_back(make_event(pid, call));
    const auto at = position();
    events.insert(events.begin() + at, block.begin(), block.end());
    if (overlay.stalls) events.resize(static_cast<std::size_t>(at) + block.size());
  }
  out.pids = pids_in_order(events);
  return out;
}

std::vector<CorpusSample> generate_corpus(const CorpusSpec& spec) {
  const BenignTraceProfile profile = spec.profile ? *spec.profile : BenignTraceProfile::builtin(spec.cluster);
  profile.validate();
  const std::vector<MaliciousOverlay>& overlays = spec.overlays.empty() ? builtin_overlays() : spec.overlays;
  std::vector<const MaliciousOverlay*> real_pool;
  for (const auto& o : overlays) {
    o.validate();
    const bool listed = std::find(spec.real_overlays.begin(), spec.real_overlays.end(), o.name) !=
                        spec.real_overlays.end();
    if (spec.real_overlays.empty() ? !o.unseen() : listed) real_pool.push_back(&o);
  }
  if (spec.real > 0 && real_pool.empty()) throw Error("no overlays available for real-style samples");
  if (spec.injected > 0 && overlays.empty()) throw Error("no overlays");

  std::map<std::string, const pickle::InjectionPayload*> payloads;
  for (const auto& p : spec.payloads) payloads[p.name] = &p;
  auto host_for = [&](std::size_t i) -> const Bytes* {
    return spec.hosts.empty() ? nullptr : &spec.hosts[i % spec.hosts.size()].second;
  };
  auto injected_pickle = [&](std::size_t i, const MaliciousOverlay& o) -> std::optional<Bytes> {
    const Bytes* host = host_for(i);
    const auto it = payloads.find(o.payload);
    if (!host || it == payloads.end()) return std::nullopt;
    const auto artifact = pickle::open_artifact(*host);
    return pickle::rebuild_artifact(artifact, pickle::inject(artifact.pickle, *it->second));
  };
  auto make_id = [&](std::string_view kind, std::size_t i) {
    std::string n = std::to_string(i);
    return spec.cluster + "-" + std::string(kind) + "-" + std::string(n.size() < 5 ? 5 - n.size() : 0, '0') + n;
  };

  std::vector<CorpusSample> out;
  out.reserve(spec.benign + spec.real + spec.injected);
  for (std::size_t i = 0; i < spec.benign; ++i) {
    CorpusSample s;
    s.id = make_id("benign", i);
    s.cluster = spec.cluster;
    s.origin = "benign";
    s.log = gen_benign_trace(profile, derive_seed(spec.seed, "benign:" + std::to_string(i))).log;
    if (const Bytes* h = host_for(i)) s.pickle = *h;
    out.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < spec.real; ++i) {
    const std::string k = std::to_string(i);
    const auto& o = *real_pool[derive_seed(spec.seed, "real:" + k) % real_pool.size()];
    CorpusSample s;
    s.id = make_id("real", i);
    s.cluster = spec.cluster;
    s.malicious = true;
    s.origin = "real";
    s.overlay = o.name;
    const auto base = gen_benign_trace(profile, derive_seed(spec.seed, "real-base:" + k));
    s.log = apply_overlay(base.log, o, derive_seed(spec.seed, "real-overlay:" + k));
    s.pickle = injected_pickle(i, o);
    out.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < spec.injected; ++i) {
    const std::string k = std::to_string(i);
    const auto& o = overlays[i % overlays.size()];
    CorpusSample s;
    s.id = make_id("injected", i);
    s.cluster = spec.cluster;
    s.malicious = true;
    s.origin = o.origin;
    s.overlay = o.name;
    const auto base = gen_benign_trace(profile, derive_seed(spec.seed, "injected-base:" + k));
    s.log = apply_overlay(base.log, o, derive_seed(spec.seed, "injected-overlay:" + k));
    s.pickle = injected_pickle(i, o);
    out.push_back(std::move(s));
  }
  return out;
}

void write_corpus(const fs::path& dir, const std::vector<CorpusSample>& samples) {
  fs::create_directories(dir / "traces");
  std::string csv = "id,cluster,label,origin,overlay,trace_path,pickle_path\n";
  for (const auto& s : samples) {
    const std::string trace_rel = "traces/" + s.id + ".strace";
    write_file_text(dir / trace_rel, trace::format_raw_trace(s.log));
    std::string pickle_rel;
    if (s.pickle) {
      pickle_rel = "pickles/" + s.id + ".pkl";
      fs::create_directories(dir / "pickles");
      write_file_bytes(dir / pickle_rel, *s.pickle);
    }
    csv += join_csv_row({s.id, s.cluster, s.malicious ? "malicious" : "benign", s.origin, s.overlay,
                         trace_rel, pickle_rel}) +
           "\n";
  }
  write_file_text(dir / "samples.csv", csv);
}

std::vector<CorpusSample> read_corpus(const fs::path& dir) {
  const fs::path index = dir / "samples.csv";
  if (!fs::exists(index)) throw MissingMetadata("no samples.csv in " + dir.string());
  const auto rows = parse_csv(read_file_text(index));
  if (rows.empty()) throw MissingMetadata("samples.csv is empty");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].size(); ++i) col[rows[0][i]] = i;
  for (const char* name : {"id", "cluster", "label", "origin", "trace_path"}) {
    if (!col.contains(name)) throw MissingMetadata(std::string("samples.csv lacks column ") + name);
  }
  std::vector<CorpusSample> out;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;
    auto field = [&](const char* name) -> std::string {
      const auto it = col.find(name);
      return it != col.end() && it->second < row.size() ? row[it->second] : std::string();
    };
    CorpusSample s;
    s.id = field("id");
    if (!seen.insert(s.id).second) throw DuplicateId(s.id);
    s.cluster = field("cluster");
    const std::string label = field("label");
    if (label != "benign" && label != "malicious") {
      throw ParseError("sample " + s.id + ": label must be benign or malicious");
    }
    s.malicious = label == "malicious";
    s.origin = field("origin");
    s.overlay = field("overlay");
    s.log = trace::parse_raw_trace(read_file_text(dir / field("trace_path")));
    if (const std::string p = field("pickle_path"); !p.empty()) s.pickle = read_file_bytes(dir / p);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace modelwarden::corpus
