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

#include "cli.h"

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "modelwarden/baselines/baselines.h"
#include "modelwarden/corpus/corpus.h"
#include "modelwarden/detectors/detectors.h"
#include "modelwarden/eval/eval.h"
#include "modelwarden/features/features.h"
#include "modelwarden/pickle/container.h"
#include "modelwarden/pickle/inject.h"
#include "modelwarden/pickle/machine.h"
#include "modelwarden/trace/trace.h"
#include "modelwarden/training/training.h"

namespace modelwarden::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

const fs::path kDataDir = MODELWARDEN_DATA_DIR;

class UsageError : public Error {
 public:
  using Error::Error;
};

struct Globals {
  std::uint64_t seed = 42;
  std::string format;
  std::size_t jobs = 1;
  std::string vocab = "builtin";
  std::string features = "pres,freq";
  int ngram = 2;
  std::string cluster = "text-generation";
  double timeout_s = 30.0;

  // Explicit flags override manifest fields.
  CLI::Option* seed_opt = nullptr;
  CLI::Option* vocab_opt = nullptr;
  CLI::Option* features_opt = nullptr;
  CLI::Option* ngram_opt = nullptr;
  CLI::Option* cluster_opt = nullptr;
  bool given(const CLI::Option* o) const { return o && o->count() > 0; }
};

std::string pick_format(const Globals& g, std::string_view fallback,
                        std::initializer_list<std::string_view> allowed) {
  const std::string f = g.format.empty() ? std::string(fallback) : g.format;
  if (std::find(allowed.begin(), allowed.end(), f) == allowed.end()) {
    throw UsageError("--format " + f + " is not supported by this command");
  }
  return f;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string fixed4(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

// POSIX shell single quoting.
std::string shell_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

features::SyscallVocabulary load_vocab(const std::string& spec, const fs::path& base = {}) {
  if (spec.empty() || spec == "builtin") return features::SyscallVocabulary::builtin();
  fs::path p = spec;
  if (p.is_relative() && !base.empty()) p = base / p;
  return features::SyscallVocabulary::load(p);
}

std::vector<fs::path> pickle_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && corpus::artifact_kind(e.path()) == corpus::ArtifactKind::kPickle) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// "registry" names the bundled sample models.
fs::path hosts_dir(const std::string& spec) {
  return spec == "registry" ? kDataDir / "registry" / "models" : fs::path(spec);
}

corpus::Registry load_registry(const std::optional<fs::path>& file) {
  if (file) return fs::is_directory(*file) ? corpus::Registry::ingest(*file) : corpus::Registry::load(*file);
  const fs::path home = corpus::default_home() / "registry.csv";
  if (fs::exists(home)) return corpus::Registry::load(home);
  return corpus::Registry::ingest(kDataDir / "registry");
}

trace::SyscallSummary summary_of(const fs::path& path) {
  const std::string text = read_file_text(path);
  if (corpus::artifact_kind(path) == corpus::ArtifactKind::kSummary) return trace::parse_summary(text);
  return trace::summarize(trace::parse_raw_trace(text));
}

training::SampleRecord record_from_path(const fs::path& p) {
  if (corpus::artifact_kind(p) == corpus::ArtifactKind::kPickle) {
    training::SampleRecord r;
    r.id = p.string();
    const auto artifact = pickle::open_artifact(read_file_bytes(p));
    r.inputs.opcode_features = pickle::static_features(pickle::disassemble(artifact.pickle));
    return r;
  }
  return training::record_from_files(p.string(), p);
}

json confusion_json(const eval::Confusion& c) {
  const auto m = eval::metrics(c);
  return {{"tp", c.tp},
          {"tn", c.tn},
          {"fp", c.fp},
          {"fn", c.fn},
          {"precision", m.precision.str()},
          {"recall", m.recall.str()},
          {"f1", m.f1.str()},
          {"accuracy", m.accuracy.str()}};
}

std::string confusion_text(const eval::Confusion& c) {
  const auto m = eval::metrics(c);
  std::ostringstream os;
  os << "tp=" << c.tp << " tn=" << c.tn << " fp=" << c.fp << " fn=" << c.fn << " precision=" << m.precision.str()
     << " recall=" << m.recall.str() << " f1=" << m.f1.str();
  return os.str();
}

struct LoadedManifest {
  training::RunManifest manifest;
  fs::path base;
  fs::path dataset;
};

LoadedManifest load_manifest(const fs::path& path, const Globals& g) {
  LoadedManifest lm;
  lm.manifest = training::manifest_from_json(read_file_text(path));
  lm.base = path.parent_path();
  auto& m = lm.manifest;
  if (g.given(g.seed_opt)) m.seed = g.seed;
  if (g.given(g.features_opt)) m.features = g.features;
  if (g.given(g.ngram_opt)) m.ngram = g.ngram;
  if (g.given(g.cluster_opt)) m.cluster = g.cluster;
  if (g.given(g.vocab_opt)) m.vocab = g.vocab == "builtin" ? g.vocab : fs::absolute(g.vocab).string();
  features::FeatureSet::parse(m.features, m.ngram);
  if (m.dataset.empty()) throw ParseError("manifest names no dataset");
  lm.dataset = fs::path(m.dataset).is_relative() ? lm.base / m.dataset : fs::path(m.dataset);
  return lm;
}

// ------------------------------------------------------------------ disasm

int cmd_disasm(const Globals& g, const fs::path& path, std::ostream& out) {
  const std::string fmt = pick_format(g, "text", {"text", "json"});
  const auto artifact = pickle::open_artifact(read_file_bytes(path));
  const auto program = pickle::disassemble(artifact.pickle);
  if (fmt == "text") {
    out << pickle::format_disassembly(program);
    return kOk;
  }
  json imports = json::array();
  for (const auto& ref : pickle::extract_imports(program)) {
    imports.push_back({{"module", ref.module},
                       {"name", ref.name},
                       {"resolved", ref.resolved},
                       {"via", ref.via},
                       {"position", ref.position}});
  }
  const auto report = pickle::validate(program);
  json calls = json::array();
  for (const auto& c : report.calls) {
    calls.push_back({{"callable", c.callable}, {"nargs", c.nargs}, {"via", c.via}, {"position", c.position}});
  }
  json counts = json::object();
  for (const auto& [key, value] : pickle::static_features(program)) counts[key.substr(4)] = value;
  json j = {{"path", path.string()},
            {"member", artifact.member_name()},
            {"protocol", program.protocol},
            {"opcodes", program.opcodes.size()},
            {"ends_with_stop", program.ends_with_stop},
            {"trailing_bytes", program.trailing_bytes},
            {"valid", report.success},
            {"failures", report.failures},
            {"imports", imports},
            {"calls", calls},
            {"opcode_counts", counts}};
  out << j.dump(2) << "\n";
  return kOk;
}

// ------------------------------------------------------------------ inject

pickle::InjectionPayload resolve_payload(const std::string& spec, const fs::path& library) {
  if (fs::is_regular_file(spec)) return pickle::load_payload(spec);
  const fs::path candidate = library / (spec + ".pkl");
  if (!fs::exists(candidate)) throw UsageError("unknown payload '" + spec + "' (looked in " + library.string() + ")");
  return pickle::load_payload(candidate);
}

int cmd_inject(const Globals& g, const fs::path& host, const std::string& payload_spec, const fs::path& library,
               const fs::path& out_path, std::ostream& out, std::ostream& err) {
  const std::string fmt = pick_format(g, "text", {"text", "json"});
  const auto payload = resolve_payload(payload_spec, library);
  const auto artifact = pickle::open_artifact(read_file_bytes(host));
  const auto result = pickle::inject_detailed(artifact.pickle, payload);
  const auto report = pickle::validate(result.bytes);
  if (!report.success || !report.memo_collisions.empty()) {
    for (const auto& f : report.failures) err << "validation: " << f << "\n";
    if (!report.memo_collisions.empty()) err << "validation: " << report.memo_collisions.size() << " memo collisions\n";
    throw ParseError("injected program does not validate; nothing written");
  }
  write_file_bytes(out_path, pickle::rebuild_artifact(artifact, result.bytes));

  std::vector<std::string> calls;
  for (const auto& c : report.calls) calls.push_back(c.callable);
  if (fmt == "json") {
    json j = {{"host", host.string()},
              {"payload", payload.name},
              {"output", out_path.string()},
              {"splice_offset", result.splice_offset},
              {"splice_length", result.splice_length},
              {"memo_offset", result.remap.offset},
              {"implicit_memo_host", result.implicit_memo_host},
              {"calls", calls}};
    out << j.dump(2) << "\n";
  } else {
    out << out_path.string() << ": " << payload.name << " spliced at byte " << result.splice_offset << " ("
        << result.splice_length << " bytes), memo offset " << result.remap.offset << "\n";
    for (const auto& c : calls) out << "  call " << c << "\n";
  }
  return kOk;
}

// ------------------------------------------------------------- trace-parse

int cmd_trace_parse(const Globals& g, const fs::path& path, bool strict, std::ostream& out, std::ostream& err) {
  const std::string fmt = pick_format(g, "text", {"text", "csv", "json"});
  const std::string text = read_file_text(path);
  std::optional<trace::TraceLog> log;
  trace::SyscallSummary summary;
  if (corpus::artifact_kind(path) == corpus::ArtifactKind::kSummary) {
    summary = trace::parse_summary(text);
  } else {
    log = trace::parse_raw_trace(text, {strict});
    summary = trace::summarize(*log);
    if (log->diagnostics.malformed_lines > 0) {
      err << "warning: skipped " << log->diagnostics.malformed_lines << " malformed lines\n";
    }
  }
  if (fmt == "text") {
    out << trace::format_summary(summary);
  } else if (fmt == "csv") {
    out << "syscall,count\n";
    for (const auto& [name, count] : summary.counts) out << name << "," << count << "\n";
  } else {
    json j = {{"path", path.string()}, {"total", summary.total()}, {"counts", summary.counts}};
    if (log) {
      const auto& d = log->diagnostics;
      j["events"] = log->events.size();
      j["pids"] = log->pids;
      j["diagnostics"] = {{"signal_lines", d.signal_lines},
                          {"exit_lines", d.exit_lines},
                          {"info_lines", d.info_lines},
                          {"malformed_lines", d.malformed_lines},
                          {"orphan_resumed", d.orphan_resumed},
                          {"unmatched_unfinished", d.unmatched_unfinished}};
    }
    out << j.dump(2) << "\n";
  }
  return kOk;
}

// --------------------------------------------------------------- featurize

int cmd_featurize(const Globals& g, const std::vector<std::string>& inputs, const fs::path& out_path,
                  std::ostream& out, std::ostream& err) {
  const std::string fmt = pick_format(g, "text", {"text", "json"});
  const auto set = features::FeatureSet::parse(g.features, g.ngram);
  const auto vocab = load_vocab(g.vocab);
  std::vector<training::SampleRecord> records;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      auto rs = training::records_from_corpus(corpus::read_corpus(in), set.needs_log());
      std::move(rs.begin(), rs.end(), std::back_inserter(records));
    } else {
      records.push_back(record_from_path(in));
    }
  }
  features::ExtractionDiagnostics diag;
  std::vector<FeatureMap> maps;
  std::vector<std::string> ids;
  for (const auto& r : records) {
    maps.push_back(features::extract(r.inputs, set, vocab, &diag));
    ids.push_back(r.id);
  }
  const auto columns = features::build_columns(set, vocab, maps);
  const auto matrix = features::vectorize(maps, columns, ids);
  features::save_matrix(out_path, matrix);
  for (const auto& [name, count] : diag.out_of_vocabulary) {
    err << "warning: '" << name << "' is not in the vocabulary (" << count << " calls dropped)\n";
  }
  if (fmt == "json") {
    json j = {{"output", out_path.string()},
              {"rows", matrix.rows()},
              {"columns", matrix.cols()},
              {"features", set.to_string()},
              {"vocabulary_hash", vocab.hash()}};
    out << j.dump(2) << "\n";
  } else {
    out << matrix.rows() << " rows x " << matrix.cols() << " columns -> " << out_path.string() << "\n";
  }
  return kOk;
}

// ------------------------------------------------------------------- train

int cmd_train(const Globals& g, const fs::path& manifest_path, const fs::path& out_dir, std::ostream& out,
              std::ostream& err) {
  const std::string fmt = pick_format(g, "text", {"text", "json"});
  auto lm = load_manifest(manifest_path, g);
  const auto vocab = load_vocab(lm.manifest.vocab, lm.base);
  const auto set = features::FeatureSet::parse(lm.manifest.features, lm.manifest.ngram);
  const auto records = training::records_from_corpus(corpus::read_corpus(lm.dataset), set.needs_log());
  const auto result = training::train_pipeline(records, lm.manifest, vocab, g.jobs);
  for (const auto& w : result.split.warnings) err << "warning: " << w << "\n";

  lm.manifest.vocabulary_hash = vocab.hash();
  const double cv_f1 = result.grid.leaderboard.front().mean_f1;
  json metrics = {{"best", result.grid.best.key()},
                  {"cv_f1", cv_f1},
                  {"split",
                   {{"train", result.split.train_ids.size()},
                    {"val", result.split.val_ids.size()},
                    {"test", result.split.test_ids.size()}}},
                  {"test", confusion_json(result.test_confusion)}};

  fs::create_directories(out_dir);
  write_file_bytes(out_dir / "model.json", detectors::save_model(result.model));
  write_file_text(out_dir / "leaderboard.csv", training::leaderboard_csv(result.grid));
  write_file_text(out_dir / "split.csv", training::split_csv(result.split));
  write_file_text(out_dir / "metrics.json", metrics.dump(2) + "\n");
  write_file_text(out_dir / "manifest.json", training::manifest_to_json(lm.manifest));

  if (fmt == "json") {
    out << metrics.dump(2) << "\n";
  } else {
    out << "best: " << result.grid.best.key() << " (cv f1 " << fixed4(cv_f1) << ")\n"
        << "test: " << confusion_text(result.test_confusion) << "\n"
        << "wrote model.json, leaderboard.csv, split.csv, metrics.json, manifest.json to " << out_dir.string()
        << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------- evaluate

std::set<std::string> partition_ids(const fs::path& split_path, const std::string& partition) {
  const auto rows = parse_csv(read_file_text(split_path));
  if (rows.empty() || rows[0] != CsvRow{"id", "partition"}) {
    throw ParseError(split_path.string() + ": expected header id,partition");
  }
  std::set<std::string> ids;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() == 1 && rows[i][0].empty()) continue;
    if (rows[i].size() != 2) throw ParseError(split_path.string() + ": bad row " + std::to_string(i + 1));
    if (rows[i][1] == partition) ids.insert(rows[i][0]);
  }
  if (ids.empty()) throw ParseError(split_path.string() + ": no rows in partition '" + partition + "'");
  return ids;
}

int cmd_evaluate(const Globals& g, const fs::path& model_path, const fs::path& dataset,
                 const std::optional<fs::path>& split_path, const std::string& partition,
                 const std::string& baselines, std::ostream& out, std::ostream& err) {
  const std::string fmt = pick_format(g, "csv", {"csv", "text", "json"});
  bool use_static = false, use_dynamic = false;
  if (baselines == "all") {
    use_static = use_dynamic = true;
  } else if (baselines != "none") {
    for (const auto& b : split(baselines, ',')) {
      if (b == "static") {
        use_static = true;
      } else if (b == "dynamic") {
        use_dynamic = true;
      } else {
        throw UsageError("unknown baseline '" + b + "' (all, none, static, dynamic)");
      }
    }
  }

  const auto model = detectors::load_model(read_file_bytes(model_path));
  const auto set = features::FeatureSet::parse(model.feature_set, model.ngram);
  const auto vocab = load_vocab(g.vocab);

  auto samples = corpus::read_corpus(dataset);
  if (split_path) {
    const auto keep = partition_ids(*split_path, partition);
    std::set<std::string> present;
    for (const auto& s : samples) present.insert(s.id);
    for (const auto& id : keep) {
      if (!present.contains(id)) throw ParseError("split names unknown sample '" + id + "'");
    }
    std::erase_if(samples, [&](const corpus::CorpusSample& s) { return !keep.contains(s.id); });
  }
  std::vector<std::optional<Bytes>> pickles;
  for (const auto& s : samples) pickles.push_back(s.pickle);
  const auto records = training::records_from_corpus(std::move(samples), set.needs_log());

  std::vector<const training::SampleRecord*> ptrs;
  std::vector<eval::EvalSample> eval_samples;
  for (const auto& r : records) {
    ptrs.push_back(&r);
    eval_samples.push_back({r.id, r.label, r.origin});
  }
  const auto verdicts = training::score_records(model, ptrs, vocab);

  std::vector<eval::DetectorRun> runs;
  runs.push_back({"modelwarden", [&](std::size_t i) { return verdicts[i]; }});
  if (use_static) {
    runs.push_back({"static-blacklist", [&](std::size_t i) {
                      if (!pickles[i]) throw Error("sample '" + records[i].id + "' has no pickle artifact");
                      const auto artifact = pickle::open_artifact(*pickles[i]);
                      return baselines::static_blacklist_scan(pickle::disassemble(artifact.pickle)).verdict;
                    }});
  }
  if (use_dynamic) {
    runs.push_back({"dynamic-blacklist", [&](std::size_t i) {
                      return baselines::dynamic_blacklist_scan(records[i].inputs.summary).verdict;
                    }});
  }
  const auto rows = eval::compare(runs, eval_samples);
  for (const auto& r : rows) {
    if (!r.error.empty()) err << "warning: " << r.detector << " failed: " << r.error << "\n";
  }

  if (fmt == "csv") {
    out << eval::comparison_csv(rows);
  } else if (fmt == "text") {
    out << eval::comparison_text(rows);
  } else {
    json arr = json::array();
    for (const auto& r : rows) {
      json origins = json::object();
      for (const auto& [origin, counts] : r.by_origin) {
        origins[origin] = {{"detected", counts.first}, {"total", counts.second}};
      }
      json j = {{"detector", r.detector}, {"confusion", confusion_json(r.confusion)}, {"by_origin", origins}};
      if (!r.error.empty()) j["error"] = r.error;
      arr.push_back(j);
    }
    out << arr.dump(2) << "\n";
  }
  return kOk;
}

// -------------------------------------------------------------------- scan

int cmd_scan(const Globals& g, const std::vector<std::string>& inputs, const std::optional<fs::path>& model_opt,
             const std::vector<std::string>& ids, const std::optional<fs::path>& registry_file,
             std::ostream& out) {
  const std::string fmt = pick_format(g, "text", {"text", "json"});
  if (inputs.empty() && ids.empty()) throw UsageError("nothing to scan: give a trace path or --id");
  const fs::path model_path = model_opt ? *model_opt : kDataDir / "models" / (g.cluster + ".model.json");
  const auto model = detectors::load_model(read_file_bytes(model_path));
  const auto vocab = load_vocab(g.vocab);

  std::vector<training::SampleRecord> records;
  for (const auto& in : inputs) {
    if (corpus::artifact_kind(in) == corpus::ArtifactKind::kPickle) {
      throw UsageError(in + ": a model artifact is scanned through its load trace; record one inside a sandbox "
                            "(see `modelwarden trace`) and scan that");
    }
    records.push_back(training::record_from_files(in, in));
  }
  if (!ids.empty()) {
    const auto registry = load_registry(registry_file);
    for (const auto& id : ids) {
      const auto& entry = registry.at(id);
      const auto trace_path = registry.trace_path(entry);
      if (!trace_path) throw Error("registry entry '" + id + "' has no trace");
      records.push_back(training::record_from_files(id, *trace_path, registry.pickle_path(entry)));
    }
  }
  std::vector<const training::SampleRecord*> ptrs;
  for (const auto& r : records) ptrs.push_back(&r);
  const auto verdicts = training::score_records(model, ptrs, vocab);

  bool any = false;
  json arr = json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& v = verdicts[i];
    any = any || v.malicious();
    const std::string label = lower(detectors::label_name(v.label));
    if (fmt == "text") {
      out << label << " score=" << format_double(v.score) << " " << records[i].id << "\n";
    } else {
      arr.push_back({{"input", records[i].id}, {"verdict", label}, {"score", v.score}});
    }
  }
  if (fmt == "json") out << arr.dump(2) << "\n";
  return any ? kMalicious : kOk;
}

// -------------------------------------------------------------- gen-corpus

struct GenCorpusArgs {
  fs::path out_dir;
  std::size_t benign = 2000;
  std::size_t real = 25;
  std::size_t injected = 375;
  std::optional<fs::path> profile;
  std::optional<fs::path> overlays;
  std::vector<std::string> only;
  std::string hosts = "registry";
  fs::path payloads = kDataDir / "payloads";
};

int cmd_gen_corpus(const Globals& g, const GenCorpusArgs& a, std::ostream& out) {
  const std::string fmt = pick_format(g, "text", {"text", "json"});
  corpus::CorpusSpec spec;
  spec.cluster = g.cluster;
  spec.benign = a.benign;
  spec.real = a.real;
  spec.injected = a.injected;
  spec.seed = g.seed;
  spec.profile = a.profile ? corpus::profile_from_json(read_file_text(*a.profile))
                           : corpus::BenignTraceProfile::builtin(g.cluster);
  spec.overlays = a.overlays ? corpus::overlays_from_json(read_file_text(*a.overlays)) : corpus::builtin_overlays();
  if (!a.only.empty()) {
    std::vector<corpus::MaliciousOverlay> kept;
    for (const auto& name : a.only) {
      const auto it = std::find_if(spec.overlays.begin(), spec.overlays.end(),
                                   [&](const corpus::MaliciousOverlay& o) { return o.name == name; });
      if (it == spec.overlays.end()) throw UsageError("unknown overlay '" + name + "'");
      kept.push_back(*it);
    }
    spec.overlays = std::move(kept);
    spec.real_overlays = a.only;
  }
  if (a.hosts != "none") {
    for (const auto& p : pickle_files(hosts_dir(a.hosts))) spec.hosts.emplace_back(p.filename().string(), read_file_bytes(p));
    spec.payloads = pickle::load_payload_library(a.payloads);
  }

  const auto samples = corpus::generate_corpus(spec);
  corpus::write_corpus(a.out_dir, samples);
  write_file_text(a.out_dir / "profile.json", corpus::profile_to_json(*spec.profile));
  write_file_text(a.out_dir / "overlays.json", corpus::overlays_to_json(spec.overlays));
  training::RunManifest manifest;
  manifest.cluster = g.cluster;
  manifest.seed = g.seed;
  manifest.features = g.features;
  manifest.ngram = g.ngram;
  manifest.dataset = ".";
  write_file_text(a.out_dir / "manifest.json", training::manifest_to_json(manifest));

  if (fmt == "json") {
    json j = {{"output", a.out_dir.string()},
              {"benign", a.benign},
              {"real", a.real},
              {"injected", a.injected},
              {"pickles", !spec.hosts.empty()}};
    out << j.dump(2) << "\n";
  } else {
    out << "wrote " << samples.size() << " samples (" << a.benign << " benign, " << a.real << " real, "
        << a.injected << " injected) to " << a.out_dir.string() << "\n";
  }
  return kOk;
}

// ----------------------------------------------------------- cluster-stats

int cmd_cluster_stats(const Globals& g, const std::vector<std::string>& datasets,
                      const std::optional<fs::path>& registry_file, std::size_t synthetic, std::size_t k,
                      std::ostream& out) {
  const std::string fmt = pick_format(g, "csv", {"csv", "text", "json"});
  std::map<std::string, std::vector<trace::SyscallSummary>> clusters;
  if (!datasets.empty()) {
    for (const auto& dir : datasets) {
      for (const auto& s : corpus::read_corpus(dir)) {
        if (!s.malicious) clusters[s.cluster].push_back(trace::summarize(s.log));
      }
    }
  } else if (synthetic > 0) {
    for (const auto& name : corpus::BenignTraceProfile::builtin_clusters()) {
      const auto profile = corpus::BenignTraceProfile::builtin(name);
      for (const auto& t : corpus::gen_benign_traces(profile, synthetic, derive_seed(g.seed, "cluster:" + name))) {
        clusters[name].push_back(t.summary);
      }
    }
  } else {
    const auto registry = load_registry(registry_file);
    for (const auto* e : registry.benign_pool()) {
      if (const auto p = registry.trace_path(*e)) clusters[e->cluster].push_back(summary_of(*p));
    }
  }
  const auto stats = training::cluster_divergence(clusters, k);
  if (fmt == "csv") {
    out << training::cluster_stats_csv(stats);
  } else if (fmt == "json") {
    json rows = json::array();
    for (const auto& r : stats.top) {
      rows.push_back({{"syscall", r.syscall},
                      {"spread", r.spread},
                      {"mean", r.mean},
                      {"sd", r.sd},
                      {"pooled_sd", r.pooled_sd}});
    }
    out << json{{"clusters", stats.clusters}, {"top", rows}}.dump(2) << "\n";
  } else {
    out << std::left << std::setw(5) << "rank" << std::setw(20) << "syscall" << std::right << std::setw(10)
        << "spread";
    for (const auto& c : stats.clusters) out << "  " << c;
    out << "\n";
    for (std::size_t i = 0; i < stats.top.size(); ++i) {
      const auto& r = stats.top[i];
      out << std::left << std::setw(5) << i + 1 << std::setw(20) << r.syscall << std::right << std::setw(10)
          << fixed4(r.spread);
      for (const auto& c : stats.clusters) out << "  " << fixed4(r.mean.at(c)) << "+-" << fixed4(r.sd.at(c));
      out << "\n";
    }
  }
  return kOk;
}

// ---------------------------------------------------------------- campaign

int cmd_campaign(const Globals& g, const std::string& hosts_spec, const fs::path& payload_dir,
                 const std::optional<fs::path>& out_dir, std::ostream& out, std::ostream& err) {
  const std::string fmt = pick_format(g, "csv", {"csv", "text", "json"});
  std::vector<corpus::CampaignHost> hosts;
  for (const auto& p : pickle_files(hosts_dir(hosts_spec))) hosts.push_back({p.filename().string(), read_file_bytes(p)});
  if (hosts.empty()) throw UsageError("no host artifacts in " + hosts_dir(hosts_spec).string());
  const auto payloads = pickle::load_payload_library(payload_dir);
  corpus::CampaignOptions options;
  options.timeout_s = g.timeout_s;
  options.jobs = g.jobs;
  options.out_dir = out_dir;
  options.seed = g.seed;
  const auto rows = corpus::run_injection_campaign(hosts, payloads, options);

  std::size_t valid = 0, timed_out = 0;
  for (const auto& r : rows) {
    valid += r.valid ? 1 : 0;
    timed_out += r.timed_out ? 1 : 0;
    if (!r.valid) err << "invalid: " << r.host_id << " x " << r.payload << ": " << r.error << "\n";
  }
  if (fmt == "csv") {
    out << corpus::campaign_csv(rows);
  } else if (fmt == "json") {
    json arr = json::array();
    for (const auto& r : rows) {
      json j = {{"host", r.host_id},
                {"payload", r.payload},
                {"valid", r.valid},
                {"recorded_calls", r.recorded_calls},
                {"timed_out", r.timed_out},
                {"duration_ms", r.duration_ms}};
      if (!r.error.empty()) j["error"] = r.error;
      arr.push_back(j);
    }
    out << arr.dump(2) << "\n";
  } else {
    out << valid << "/" << rows.size() << " pairs valid, " << timed_out << " timed out\n";
  }
  return valid == rows.size() ? kOk : kInvalidInput;
}

// ------------------------------------------------------------------ ingest

int cmd_ingest(const fs::path& dir, const std::optional<fs::path>& registry_file, std::ostream& out) {
  const auto registry = corpus::Registry::ingest(dir);
  const fs::path target = registry_file ? *registry_file : corpus::default_home() / "registry.csv";
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  registry.save(target);
  out << "ingested " << registry.entries().size() << " entries into " << target.string() << "\n";
  return kOk;
}

// ------------------------------------------------------------------- trace

int cmd_trace(const std::vector<std::string>& command, const fs::path& out_path, std::ostream& out) {
  if (command.empty()) throw UsageError("no command given; use `trace -o log.strace -- <command...>`");
  std::string joined;
  for (const auto& part : command) joined += (joined.empty() ? "" : " ") + shell_quote(part);
  const fs::path parent = out_path.has_parent_path() ? out_path.parent_path() : fs::path(".");
  const fs::path scratch = parent / (out_path.filename().string() + ".tracing");
  std::string log;
  try {
    log = corpus::trace_command(joined, scratch);
  } catch (...) {
    fs::remove_all(scratch);
    throw;
  }
  fs::remove_all(scratch);
  write_file_text(out_path, log);
  const auto parsed = trace::parse_raw_trace(log);
  out << parsed.events.size() << " events from " << parsed.pids.size() << " processes -> " << out_path.string()
      << "\n";
  return kOk;
}

// ---------------------------------------------------------------- ablation

int cmd_ablation(const Globals& g, const fs::path& manifest_path, const std::vector<std::string>& names,
                 const std::optional<fs::path>& out_file, std::ostream& out) {
  const std::string fmt = pick_format(g, "csv", {"csv", "json"});
  const auto lm = load_manifest(manifest_path, g);
  const auto vocab = load_vocab(lm.manifest.vocab, lm.base);
  auto variants = training::default_ablation_variants();
  if (!names.empty()) {
    std::vector<training::AblationVariant> kept;
    for (const auto& name : names) {
      const auto it = std::find_if(variants.begin(), variants.end(),
                                   [&](const training::AblationVariant& v) { return v.name == name; });
      if (it == variants.end()) throw UsageError("unknown ablation variant '" + name + "'");
      kept.push_back(*it);
    }
    variants = std::move(kept);
  }
  const auto records = training::records_from_corpus(corpus::read_corpus(lm.dataset), true);
  const auto rows = training::run_ablation(records, lm.manifest, variants, vocab, g.jobs);
  std::string text;
  if (fmt == "csv") {
    text = training::ablation_csv(rows);
  } else {
    json arr = json::array();
    for (const auto& r : rows) {
      arr.push_back({{"variant", r.variant.name}, {"best", r.best.key()}, {"cv_f1", r.cv_f1}, {"test", confusion_json(r.test)}});
    }
    text = arr.dump(2) + "\n";
  }
  if (out_file) {
    write_file_text(*out_file, text);
  } else {
    out << text;
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Behavioral scanner for pickled model artifacts.\n"
               "Exit status: 0 benign/success, 2 malicious, 1 operational error, 3 invalid input.",
               "modelwarden"};
  app.fallthrough();
  app.set_version_flag("--version", "modelwarden 0.1.0");

  Globals g;
  g.seed_opt = app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--format", g.format, "Output format: text, csv or json (default depends on the command)")
      ->check(CLI::IsMember({"text", "csv", "json"}));
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  g.vocab_opt = app.add_option("--vocab", g.vocab, "Syscall vocabulary file, or 'builtin'")->capture_default_str();
  g.features_opt =
      app.add_option("--features", g.features, "Feature families: pres,freq[,seq][,procseq][,op]")->capture_default_str();
  g.ngram_opt = app.add_option("--ngram", g.ngram, "n for sequence features")->capture_default_str();
  g.cluster_opt = app.add_option("--cluster", g.cluster, "Task cluster")->capture_default_str();
  app.add_option("--timeout-s", g.timeout_s, "Loader deadline for blocking payloads")->capture_default_str();

  // disasm
  fs::path disasm_path;
  auto* disasm = app.add_subcommand("disasm", "Disassemble a pickle or a zip model container");
  disasm->add_option("path", disasm_path, "Pickle file")->required();

  // inject
  fs::path inject_host, inject_out, payload_dir = kDataDir / "payloads";
  std::string inject_payload;
  auto* inject = app.add_subcommand("inject", "Splice a payload into a model artifact");
  inject->add_option("host", inject_host, "Host artifact")->required();
  inject->add_option("payload", inject_payload, "Payload name in the library, or a .pkl fragment")->required();
  inject->add_option("-o,--out", inject_out, "Output artifact")->required();
  inject->add_option("--payloads", payload_dir, "Payload library directory");

  // trace-parse
  fs::path parse_path;
  bool strict = false;
  auto* trace_parse = app.add_subcommand("trace-parse", "Summarize an strace log or summary table");
  trace_parse->add_option("path", parse_path, "Trace file")->required();
  trace_parse->add_flag("--strict", strict, "Fail on malformed lines");

  // featurize
  std::vector<std::string> featurize_inputs;
  fs::path featurize_out;
  auto* featurize = app.add_subcommand("featurize", "Build a feature matrix from traces or corpus directories");
  featurize->add_option("inputs", featurize_inputs, "Trace, summary or pickle files; corpus directories")->required();
  featurize->add_option("-o,--out", featurize_out, "Matrix file (.csv for CSV, binary otherwise)")->required();

  // train
  fs::path train_manifest, train_out;
  auto* train = app.add_subcommand("train", "Split, grid-search and fit a detector from a run manifest");
  train->add_option("manifest", train_manifest, "Run manifest JSON")->required();
  train->add_option("-o,--out-dir", train_out, "Output directory")->required();

  // evaluate
  fs::path eval_model, eval_dataset;
  std::optional<fs::path> eval_split;
  std::string eval_partition = "test", eval_baselines = "all";
  auto* evaluate = app.add_subcommand("evaluate", "Compare a trained model with the blacklist baselines");
  evaluate->add_option("--model", eval_model, "Trained model")->required();
  evaluate->add_option("--dataset", eval_dataset, "Corpus directory")->required();
  evaluate->add_option("--split", eval_split, "split.csv written by train");
  evaluate->add_option("--partition", eval_partition, "Partition of --split to evaluate")->capture_default_str();
  evaluate->add_option("--baselines", eval_baselines, "all, none, or a list of static,dynamic")->capture_default_str();

  // scan
  std::vector<std::string> scan_inputs, scan_ids;
  std::optional<fs::path> scan_model, registry_file;
  auto* scan = app.add_subcommand("scan", "Score load traces; exit 2 when any is malicious");
  scan->add_option("inputs", scan_inputs, "Trace or summary files");
  scan->add_option("--model", scan_model, "Trained model (default: bundled model for --cluster)");
  scan->add_option("--id", scan_ids, "Registry ids to scan");
  scan->add_option("--registry", registry_file, "Registry file or directory");

  // gen-corpus
  GenCorpusArgs gen;
  std::string only;
  auto* gen_corpus = app.add_subcommand("gen-corpus", "Generate a labeled synthetic trace corpus");
  gen_corpus->add_option("-o,--out-dir", gen.out_dir, "Output directory")->required();
  gen_corpus->add_option("--benign", gen.benign)->capture_default_str();
  gen_corpus->add_option("--real", gen.real, "Real-style malicious samples")->capture_default_str();
  gen_corpus->add_option("--injected", gen.injected)->capture_default_str();
  gen_corpus->add_option("--profile", gen.profile, "Benign profile JSON (default: builtin for --cluster)");
  gen_corpus->add_option("--overlays", gen.overlays, "Overlay library JSON (default: builtin)");
  gen_corpus->add_option("--only-overlays", only, "Comma-separated overlay names to use");
  gen_corpus->add_option("--hosts", gen.hosts, "Pickle host directory, 'registry' or 'none'")->capture_default_str();
  gen_corpus->add_option("--payloads", gen.payloads, "Payload library directory");

  // cluster-stats
  std::vector<std::string> stats_datasets;
  std::size_t synthetic = 0, top_k = 10;
  auto* cluster_stats = app.add_subcommand("cluster-stats", "Syscalls whose means differ most across clusters");
  cluster_stats->add_option("--dataset", stats_datasets, "Corpus directories (benign samples are used)");
  cluster_stats->add_option("--registry", registry_file, "Registry file or directory");
  cluster_stats->add_option("--synthetic", synthetic, "Generate this many traces per builtin cluster instead");
  cluster_stats->add_option("-k,--top", top_k, "Rows to report")->capture_default_str();

  // campaign
  std::string campaign_hosts = "registry";
  std::optional<fs::path> campaign_out;
  auto* campaign = app.add_subcommand("campaign", "Inject every payload into every host and validate");
  campaign->add_option("--hosts", campaign_hosts, "Host directory or 'registry'")->capture_default_str();
  campaign->add_option("--payloads", payload_dir, "Payload library directory");
  campaign->add_option("--out-dir", campaign_out, "Write injected artifacts here");

  // ingest
  fs::path ingest_dir;
  auto* ingest = app.add_subcommand("ingest", "Register a directory with metadata.csv");
  ingest->add_option("dir", ingest_dir, "Directory")->required();
  ingest->add_option("--registry", registry_file, "Registry file (default: $MODELWARDEN_HOME/registry.csv)");

  // trace
  std::vector<std::string> trace_cmd;
  fs::path trace_out;
  auto* trace_sub = app.add_subcommand("trace", "Record a command under strace -f");
  trace_sub->add_option("-o,--out", trace_out, "Log file")->required();
  trace_sub->add_option("command", trace_cmd, "Command and arguments, after --");

  // ablation
  fs::path ablation_manifest;
  std::string ablation_names;
  std::optional<fs::path> ablation_out;
  auto* ablation = app.add_subcommand("ablation", "Train feature and detector variants on one split");
  ablation->add_option("manifest", ablation_manifest, "Run manifest JSON")->required();
  ablation->add_option("--variants", ablation_names, "Comma-separated variant names (default: all)");
  ablation->add_option("-o,--out", ablation_out, "Write the table here instead of stdout");

  app.require_subcommand(1);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kOperational;
  }

  auto names = [](const std::string& list) {
    std::vector<std::string> out;
    for (const auto& s : split(list, ',')) {
      if (!trim(s).empty()) out.emplace_back(trim(s));
    }
    return out;
  };

  try {
    if (disasm->parsed()) return cmd_disasm(g, disasm_path, out);
    if (inject->parsed()) return cmd_inject(g, inject_host, inject_payload, payload_dir, inject_out, out, err);
    if (trace_parse->parsed()) return cmd_trace_parse(g, parse_path, strict, out, err);
    if (featurize->parsed()) return cmd_featurize(g, featurize_inputs, featurize_out, out, err);
    if (train->parsed()) return cmd_train(g, train_manifest, train_out, out, err);
    if (evaluate->parsed()) {
      return cmd_evaluate(g, eval_model, eval_dataset, eval_split, eval_partition, eval_baselines, out, err);
    }
    if (scan->parsed()) return cmd_scan(g, scan_inputs, scan_model, scan_ids, registry_file, out);
    if (gen_corpus->parsed()) {
      gen.only = names(only);
      return cmd_gen_corpus(g, gen, out);
    }
    if (cluster_stats->parsed()) return cmd_cluster_stats(g, stats_datasets, registry_file, synthetic, top_k, out);
    if (campaign->parsed()) return cmd_campaign(g, campaign_hosts, payload_dir, campaign_out, out, err);
    if (ingest->parsed()) return cmd_ingest(ingest_dir, registry_file, out);
    if (trace_sub->parsed()) return cmd_trace(trace_cmd, trace_out, out);
    if (ablation->parsed()) return cmd_ablation(g, ablation_manifest, names(ablation_names), ablation_out, out);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kOperational;
  }
  return kOperational;
}

}  // namespace modelwarden::cli
