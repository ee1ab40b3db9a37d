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

#ifndef MODELWARDEN_TRAINING_TRAINING_H_
#define MODELWARDEN_TRAINING_TRAINING_H_

// Dataset splitting, cross-validated grid search, run manifests and
// cluster statistics.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "modelwarden/corpus/corpus.h"
#include "modelwarden/detectors/detectors.h"
#include "modelwarden/eval/eval.h"
#include "modelwarden/features/features.h"

namespace modelwarden::training {

using detectors::Label;

class InsufficientMalicious : public Error {
 public:
  using Error::Error;
};

class TooFewClusters : public Error {
 public:
  using Error::Error;
};

struct SampleRecord {
  std::string id;
  std::string cluster;
  Label label = Label::kBenign;
  // benign, real, malhug, injected-malhug, injected-pypi
  std::string origin = "benign";
  std::string overlay;  // generated samples only
  features::SampleInputs inputs;
  std::int64_t likes = 0;
  std::int64_t downloads = 0;
  std::string last_commit;
};

bool is_injected(const SampleRecord& r);

// Opcode counts are filled in when the sample carries a pickle. Logs are
// moved in only when keep_logs is set.
std::vector<SampleRecord> records_from_corpus(std::vector<corpus::CorpusSample> samples,
                                              bool keep_logs = true);

// Reads a raw trace (.strace/.trace/.log) or a summary table (.summary),
// plus opcode counts from an optional pickle artifact.
SampleRecord record_from_files(std::string id, const std::filesystem::path& trace,
                               const std::optional<std::filesystem::path>& pickle = std::nullopt);

struct SplitPlan {
  std::vector<std::string> train_ids, val_ids, test_ids;  // each sorted
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

// Benign samples of the cluster split 80:10:10. Val and test each get as many
// malicious samples as benign ones: the cluster's real malicious samples half
// and half (the odd one to test), then injected ones. Benign ids on the
// denylist are dropped first.
SplitPlan build_split(const std::vector<SampleRecord>& samples, std::string_view cluster,
                      std::uint64_t seed, const std::set<std::string>& denylist = {});
// id,partition rows, in partition then id order.
std::string split_csv(const SplitPlan& plan);

struct GridCell {
  std::string detector = "ocsvm";  // ocsvm, sgd-ocsvm, iforest
  double nu = 0.1;
  detectors::KernelSpec kernel;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  double eta0 = 0.05;
  std::size_t n_estimators = 100;
  std::optional<double> contamination;
  std::size_t max_samples = 256;

  bool uses_nu() const { return detector != "iforest"; }
  // Canonical text, e.g. "ocsvm nu=0.1 kernel=rbf:auto".
  std::string key() const;
  // Parameter-order tie-break, independent of enumeration order.
  bool precedes(const GridCell& other) const;
};

struct GridSpec {
  std::string detector = "ocsvm";
  std::vector<double> nu;
  std::vector<detectors::KernelSpec> kernels;
  std::vector<std::size_t> batch_sizes;
  std::size_t epochs = 30;
  double eta0 = 0.05;
  std::vector<std::size_t> n_estimators;
  std::vector<std::optional<double>> contamination;
  std::vector<std::size_t> max_samples;

  static GridSpec defaults(std::string_view detector);
  // Cartesian product in a fixed order.
  std::vector<GridCell> cells() const;
};

struct CvOptions {
  std::size_t folds = 5;
  std::uint64_t seed = 42;
  std::size_t jobs = 1;
};

struct LeaderboardRow {
  GridCell cell;
  std::size_t rank = 0;  // 1-based; failed cells rank last
  double mean_f1 = 0.0;
  std::vector<double> fold_f1;
  std::string error;
};

struct GridResult {
  GridCell best;
  std::vector<LeaderboardRow> leaderboard;  // by rank
};

// Folds partition the benign training rows. Fold k trains on the other folds
// (scaler fitted there too) and is scored on a balanced mixture: m of its own
// benign rows and m malicious validation rows, rotated per fold, where m is
// the smaller of the two counts. Benign validation rows are unused. Cells are ranked by mean F1, then lower nu, then
// parameter order. A cell that fails (e.g. NonConvergence) is recorded with
// its error and never selected unless every cell failed.
GridResult grid_search(const features::FeatureMatrix& train, const features::FeatureMatrix& val,
                       const std::vector<Label>& val_labels, const std::vector<GridCell>& cells,
                       const CvOptions& options);

// rank,cell,mean_f1,fold_f1s(;-separated),error
std::string leaderboard_csv(const GridResult& result);

// Fits the scaler and the cell's detector on unscaled training rows.
detectors::DetectorModel fit_detector(const features::FeatureMatrix& train, const GridCell& cell,
                                      std::uint64_t seed);

// Everything that determines a training run.
struct RunManifest {
  std::string cluster = "text-generation";
  std::uint64_t seed = 42;
  std::string features = "pres,freq";
  int ngram = 2;
  std::string vocab = "builtin";  // or a path
  std::string vocabulary_hash;    // checked against the loaded vocabulary when set
  std::string dataset;            // corpus directory
  std::vector<std::string> denylist;
  std::size_t folds = 5;
  GridSpec grid = GridSpec::defaults("ocsvm");
};

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(std::string_view text);

struct TrainResult {
  SplitPlan split;
  GridResult grid;
  detectors::DetectorModel model;
  // Scores on the test partition.
  eval::Confusion test_confusion;
};

TrainResult train_pipeline(const std::vector<SampleRecord>& samples, const RunManifest& manifest,
                           const features::SyscallVocabulary& vocab, std::size_t jobs = 1);

// Verdicts for records, in order.
std::vector<detectors::Verdict> score_records(const detectors::DetectorModel& model,
                                              const std::vector<const SampleRecord*>& records,
                                              const features::SyscallVocabulary& vocab);

struct AblationVariant {
  std::string name;
  std::string features;
  int ngram = 2;
  std::string detector;         // default grid of this detector; base grid when empty
  std::size_t train_limit = 0;  // cap on benign training rows; 0 keeps all
};

// Feature-set, n-gram and architecture variants.
std::vector<AblationVariant> default_ablation_variants();

struct AblationRow {
  AblationVariant variant;
  GridCell best;
  double cv_f1 = 0.0;
  eval::Confusion test;
  eval::MetricReport metrics;
};

// One full train/test run per variant on the same split.
std::vector<AblationRow> run_ablation(const std::vector<SampleRecord>& samples, const RunManifest& base,
                                      const std::vector<AblationVariant>& variants,
                                      const features::SyscallVocabulary& vocab, std::size_t jobs = 1);
std::string ablation_csv(const std::vector<AblationRow>& rows);

struct SyscallSpread {
  std::string syscall;
  double spread = 0.0;  // max minus min cluster mean
  std::map<std::string, double> mean;  // per cluster
  std::map<std::string, double> sd;    // per cluster, population
  double pooled_sd = 0.0;              // over all samples together
};

struct ClusterStats {
  std::vector<std::string> clusters;
  std::vector<SyscallSpread> top;  // by spread desc, then name
};

ClusterStats cluster_divergence(const std::map<std::string, std::vector<trace::SyscallSummary>>& clusters,
                                std::size_t k = 10);
std::string cluster_stats_csv(const ClusterStats& stats);

}  // namespace modelwarden::training

#endif  // MODELWARDEN_TRAINING_TRAINING_H_
