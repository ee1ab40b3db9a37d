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
#include <random>
#include <unordered_map>

#include "json.hpp"
#include "modelwarden/common/io.h"
#include "modelwarden/common/parallel.h"
#include "modelwarden/pickle/container.h"
#include "modelwarden/pickle/machine.h"
#include "modelwarden/training/training.h"

namespace modelwarden::training {

namespace {

using features::FeatureMatrix;
using json = nlohmann::ordered_json;

template <typename T>
void seeded_shuffle(std::vector<T>& v, std::uint64_t seed, std::string_view key) {
  std::mt19937_64 rng(derive_seed(seed, key));
  std::shuffle(v.begin(), v.end(), rng);
}

using Index = std::unordered_map<std::string, const SampleRecord*>;

Index index_records(const std::vector<SampleRecord>& samples) {
  Index idx;
  for (const auto& s : samples) {
    if (!idx.emplace(s.id, &s).second) throw corpus::DuplicateId("duplicate sample id '" + s.id + "'");
  }
  return idx;
}

std::vector<const SampleRecord*> lookup(const Index& idx, const std::vector<std::string>& ids) {
  std::vector<const SampleRecord*> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(idx.at(id));
  return out;
}

std::vector<FeatureMap> extract_all(const std::vector<const SampleRecord*>& recs, const features::FeatureSet& set,
                                    const features::SyscallVocabulary& vocab, std::size_t jobs) {
  std::vector<FeatureMap> maps(recs.size());
  parallel_for(recs.size(), jobs, [&](std::size_t i) { maps[i] = features::extract(recs[i]->inputs, set, vocab); });
  return maps;
}

std::vector<std::string> ids_of(const std::vector<const SampleRecord*>& recs) {
  std::vector<std::string> out;
  for (const auto* r : recs) out.push_back(r->id);
  return out;
}

std::vector<Label> labels_of(const std::vector<const SampleRecord*>& recs) {
  std::vector<Label> out;
  for (const auto* r : recs) out.push_back(r->label);
  return out;
}

struct RunOutput {
  GridResult grid;
  detectors::DetectorModel model;
  eval::Confusion test;
};

RunOutput run_on_split(const Index& idx, const SplitPlan& split, const std::vector<std::string>& train_ids,
                       const RunManifest& m, const features::SyscallVocabulary& vocab, std::size_t jobs) {
  const auto set = features::FeatureSet::parse(m.features, m.ngram);
  const auto train = lookup(idx, train_ids);
  const auto val = lookup(idx, split.val_ids);
  const auto train_maps = extract_all(train, set, vocab, jobs);
  const auto columns = features::build_columns(set, vocab, train_maps);
  const FeatureMatrix x_train = features::vectorize(train_maps, columns, ids_of(train));
  const FeatureMatrix x_val = features::vectorize(extract_all(val, set, vocab, jobs), columns, ids_of(val));

  RunOutput out;
  out.grid = grid_search(x_train, x_val, labels_of(val), m.grid.cells(), {m.folds, m.seed, jobs});
  out.model = fit_detector(x_train, out.grid.best, m.seed);
  out.model.feature_set = set.to_string();
  out.model.ngram = set.ngram;
  out.model.vocabulary_hash = vocab.hash();

  const auto test = lookup(idx, split.test_ids);
  out.test = eval::confusion(score_records(out.model, test, vocab), labels_of(test));
  return out;
}

void check_vocab(const RunManifest& m, const features::SyscallVocabulary& vocab) {
  if (!m.vocabulary_hash.empty() && m.vocabulary_hash != vocab.hash()) {
    throw Error("vocabulary hash " + vocab.hash() + " does not match manifest " + m.vocabulary_hash);
  }
}

std::set<std::string> to_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

// ------------------------------------------------------------ manifest json

json grid_to_json(const GridSpec& g) {
  json j;
  j["detector"] = g.detector;
  if (g.detector == "ocsvm") {
    j["nu"] = g.nu;
    json k = json::array();
    for (const auto& spec : g.kernels) k.push_back(spec.to_string());
    j["kernels"] = k;
  } else if (g.detector == "sgd-ocsvm") {
    j["nu"] = g.nu;
    j["batch_sizes"] = g.batch_sizes;
    j["epochs"] = g.epochs;
    j["eta0"] = g.eta0;
  } else {
    j["n_estimators"] = g.n_estimators;
    json c = json::array();
    for (const auto& v : g.contamination) {
      if (v) {
        c.push_back(*v);
      } else {
        c.push_back("auto");
      }
    }
    j["contamination"] = c;
    j["max_samples"] = g.max_samples;
  }
  return j;
}

GridSpec grid_from_json(const json& j) {
  GridSpec g = GridSpec::defaults(j.value("detector", std::string("ocsvm")));
  for (const auto& [key, value] : j.items()) {
    if (key == "detector") {
      continue;
    } else if (key == "nu") {
      g.nu = value.get<std::vector<double>>();
    } else if (key == "kernels") {
      g.kernels.clear();
      for (const auto& k : value) g.kernels.push_back(detectors::KernelSpec::parse(k.get<std::string>()));
    } else if (key == "batch_sizes") {
      g.batch_sizes = value.get<std::vector<std::size_t>>();
    } else if (key == "epochs") {
      g.epochs = value.get<std::size_t>();
    } else if (key == "eta0") {
      g.eta0 = value.get<double>();
    } else if (key == "n_estimators") {
      g.n_estimators = value.get<std::vector<std::size_t>>();
    } else if (key == "contamination") {
      g.contamination.clear();
      for (const auto& c : value) {
        if (c.is_string() && c.get<std::string>() == "auto") {
          g.contamination.push_back(std::nullopt);
        } else {
          g.contamination.push_back(c.get<double>());
        }
      }
    } else if (key == "max_samples") {
      g.max_samples = value.get<std::vector<std::size_t>>();
    } else {
      throw ParseError("unknown grid key '" + key + "'");
    }
  }
  return g;
}

}  // namespace

bool is_injected(const SampleRecord& r) { return eval::is_injected_origin(r.origin); }

std::vector<SampleRecord> records_from_corpus(std::vector<corpus::CorpusSample> samples, bool keep_logs) {
  std::vector<SampleRecord> out;
  out.reserve(samples.size());
  for (auto& s : samples) {
    SampleRecord r;
    r.id = s.id;
    r.cluster = s.cluster;
    r.label = s.malicious ? Label::kMalicious : Label::kBenign;
    r.origin = s.origin;
    r.overlay = s.overlay;
    r.inputs.summary = trace::summarize(s.log);
    if (keep_logs) r.inputs.log = std::move(s.log);
    if (s.pickle) {
      const auto artifact = pickle::open_artifact(*s.pickle);
      r.inputs.opcode_features = pickle::static_features(pickle::disassemble(artifact.pickle));
    }
    out.push_back(std::move(r));
  }
  return out;
}

SampleRecord record_from_files(std::string id, const std::filesystem::path& trace,
                               const std::optional<std::filesystem::path>& pickle) {
  SampleRecord r;
  r.id = std::move(id);
  const std::string text = read_file_text(trace);
  switch (corpus::artifact_kind(trace)) {
    case corpus::ArtifactKind::kTrace:
      r.inputs.log = trace::parse_raw_trace(text);
      r.inputs.summary = trace::summarize(*r.inputs.log);
      break;
    case corpus::ArtifactKind::kSummary:
      r.inputs.summary = trace::parse_summary(text);
      break;
    default:
      throw Error("not a trace or summary file: " + trace.string());
  }
  if (pickle) {
    const auto artifact = pickle::open_artifact(read_file_bytes(*pickle));
    r.inputs.opcode_features = pickle::static_features(pickle::disassemble(artifact.pickle));
  }
  return r;
}

SplitPlan build_split(const std::vector<SampleRecord>& samples, std::string_view cluster, std::uint64_t seed,
                      const std::set<std::string>& denylist) {
  SplitPlan plan;
  plan.seed = seed;
  std::vector<std::string> benign, real, injected;
  std::size_t denied = 0;
  for (const auto& s : samples) {
    if (s.cluster != cluster) continue;
    if (s.label == Label::kBenign) {
      if (denylist.count(s.id)) {
        ++denied;
      } else {
        benign.push_back(s.id);
      }
    } else if (is_injected(s)) {
      injected.push_back(s.id);
    } else {
      real.push_back(s.id);
    }
  }
  for (auto* v : {&benign, &real, &injected}) std::sort(v->begin(), v->end());
  for (auto* v : {&benign, &real, &injected}) {
    if (std::adjacent_find(v->begin(), v->end()) != v->end()) throw corpus::DuplicateId("duplicate sample id");
  }
  seeded_shuffle(benign, seed, "split:benign");
  seeded_shuffle(real, seed, "split:real");
  seeded_shuffle(injected, seed, "split:injected");

  if (denied) plan.warnings.push_back(std::to_string(denied) + " denylisted benign samples excluded");
  if (benign.size() < 10 * real.size()) {
    plan.warnings.push_back("benign count " + std::to_string(benign.size()) + " is below 10x the real malicious count " +
                            std::to_string(real.size()));
  }

  const std::size_t t = benign.size() / 10;
  const std::size_t val_real = std::min(real.size() / 2, t);
  const std::size_t test_real = std::min(real.size() - val_real, t);
  if (val_real + test_real < real.size()) {
    plan.warnings.push_back(std::to_string(real.size() - val_real - test_real) + " real malicious samples unused");
  }
  const std::size_t need = (t - val_real) + (t - test_real);
  if (t == 0 || injected.size() < need) {
    throw InsufficientMalicious("cluster " + std::string(cluster) + " needs " + std::to_string(std::max<std::size_t>(need, 2)) +
                                " injected samples to balance val/test, has " + std::to_string(injected.size()));
  }

  auto take = [](std::vector<std::string>& from, std::size_t& pos, std::size_t n, std::vector<std::string>& to) {
    to.insert(to.end(), from.begin() + static_cast<std::ptrdiff_t>(pos), from.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
  };
  std::size_t pb = 0, pr = 0, pi = 0;
  take(benign, pb, t, plan.val_ids);
  take(benign, pb, t, plan.test_ids);
  take(benign, pb, benign.size() - 2 * t, plan.train_ids);
  take(real, pr, val_real, plan.val_ids);
  take(real, pr, test_real, plan.test_ids);
  take(injected, pi, t - val_real, plan.val_ids);
  take(injected, pi, t - test_real, plan.test_ids);
  for (auto* v : {&plan.train_ids, &plan.val_ids, &plan.test_ids}) std::sort(v->begin(), v->end());
  return plan;
}

std::string split_csv(const SplitPlan& plan) {
  std::string out = "id,partition\n";
  for (const auto& id : plan.train_ids) out += join_csv_row({id, "train"}) + "\n";
  for (const auto& id : plan.val_ids) out += join_csv_row({id, "val"}) + "\n";
  for (const auto& id : plan.test_ids) out += join_csv_row({id, "test"}) + "\n";
  return out;
}

std::string manifest_to_json(const RunManifest& m) {
  json j;
  j["cluster"] = m.cluster;
  j["seed"] = m.seed;
  j["features"] = m.features;
  j["ngram"] = m.ngram;
  j["vocab"] = m.vocab;
  j["vocabulary_hash"] = m.vocabulary_hash;
  j["dataset"] = m.dataset;
  j["denylist"] = m.denylist;
  j["folds"] = m.folds;
  j["grid"] = grid_to_json(m.grid);
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(std::string_view text) {
  RunManifest m;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ParseError("manifest must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key == "cluster") {
        m.cluster = value.get<std::string>();
      } else if (key == "seed") {
        m.seed = value.get<std::uint64_t>();
      } else if (key == "features") {
        m.features = value.get<std::string>();
      } else if (key == "ngram") {
        m.ngram = value.get<int>();
      } else if (key == "vocab") {
        m.vocab = value.get<std::string>();
      } else if (key == "vocabulary_hash") {
        m.vocabulary_hash = value.get<std::string>();
      } else if (key == "dataset") {
        m.dataset = value.get<std::string>();
      } else if (key == "denylist") {
        m.denylist = value.get<std::vector<std::string>>();
      } else if (key == "folds") {
        m.folds = value.get<std::size_t>();
      } else if (key == "grid") {
        m.grid = grid_from_json(value);
      } else {
        throw ParseError("unknown manifest key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad manifest: ") + e.what());
  }
  features::FeatureSet::parse(m.features, m.ngram);
  return m;
}

TrainResult train_pipeline(const std::vector<SampleRecord>& samples, const RunManifest& manifest,
                           const features::SyscallVocabulary& vocab, std::size_t jobs) {
  check_vocab(manifest, vocab);
  const Index idx = index_records(samples);
  TrainResult out;
  out.split = build_split(samples, manifest.cluster, manifest.seed, to_set(manifest.denylist));
  auto run = run_on_split(idx, out.split, out.split.train_ids, manifest, vocab, jobs);
  out.grid = std::move(run.grid);
  out.model = std::move(run.model);
  out.test_confusion = run.test;
  return out;
}

std::vector<detectors::Verdict> score_records(const detectors::DetectorModel& model,
                                              const std::vector<const SampleRecord*>& records,
                                              const features::SyscallVocabulary& vocab) {
  if (!model.vocabulary_hash.empty() && model.vocabulary_hash != vocab.hash()) {
    throw Error("model was trained with vocabulary " + model.vocabulary_hash + ", got " + vocab.hash());
  }
  const auto set = features::FeatureSet::parse(model.feature_set, model.ngram);
  std::vector<detectors::Verdict> out;
  out.reserve(records.size());
  for (const auto* r : records) out.push_back(model.decide_map(features::extract(r->inputs, set, vocab)));
  return out;
}

std::vector<AblationVariant> default_ablation_variants() {
  return {
      {"presence", "pres", 2, "", 0},
      {"presence+frequency", "pres,freq", 2, "", 0},
      {"sequence-2gram", "seq", 2, "", 0},
      {"sequence-3gram", "seq", 3, "", 0},
      {"sequence-4gram", "seq", 4, "", 0},
      {"process-sequence", "procseq", 2, "", 0},
      {"presence+frequency+opcodes", "pres,freq,op", 2, "", 0},
      {"sgd-ocsvm", "pres,freq", 2, "sgd-ocsvm", 0},
      {"iforest", "pres,freq", 2, "iforest", 0},
      {"train-200", "pres,freq", 2, "", 200},
  };
}

std::vector<AblationRow> run_ablation(const std::vector<SampleRecord>& samples, const RunManifest& base,
                                      const std::vector<AblationVariant>& variants,
                                      const features::SyscallVocabulary& vocab, std::size_t jobs) {
  check_vocab(base, vocab);
  const Index idx = index_records(samples);
  const SplitPlan split = build_split(samples, base.cluster, base.seed, to_set(base.denylist));
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    RunManifest m = base;
    m.features = v.features;
    m.ngram = v.ngram;
    if (!v.detector.empty()) m.grid = GridSpec::defaults(v.detector);
    std::vector<std::string> train_ids = split.train_ids;
    if (v.train_limit > 0 && v.train_limit < train_ids.size()) {
      seeded_shuffle(train_ids, base.seed, "ablation:train-limit");
      train_ids.resize(v.train_limit);
      std::sort(train_ids.begin(), train_ids.end());
    }
    const auto run = run_on_split(idx, split, train_ids, m, vocab, jobs);
    AblationRow row;
    row.variant = v;
    row.best = run.grid.best;
    row.cv_f1 = run.grid.leaderboard.front().mean_f1;
    row.test = run.test;
    row.metrics = eval::metrics(run.test);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out =
      "variant,features,ngram,detector,train_limit,best,cv_f1,tp,tn,fp,fn,precision,recall,f1,accuracy\n";
  for (const auto& r : rows) {
    out += join_csv_row({r.variant.name, r.variant.features, std::to_string(r.variant.ngram), r.best.detector,
                         std::to_string(r.variant.train_limit), r.best.key(), format_double(r.cv_f1),
                         std::to_string(r.test.tp), std::to_string(r.test.tn), std::to_string(r.test.fp),
                         std::to_string(r.test.fn), r.metrics.precision.str(), r.metrics.recall.str(),
                         r.metrics.f1.str(), r.metrics.accuracy.str()}) +
           "\n";
  }
  return out;
}

}  // namespace modelwarden::training
