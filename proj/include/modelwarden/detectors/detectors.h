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

#ifndef MODELWARDEN_DETECTORS_DETECTORS_H_
#define MODELWARDEN_DETECTORS_DETECTORS_H_

// One-class detectors trained on benign rows only. Every model maps a scaled
// feature row to a real score and a Benign/Malicious verdict:
//   SVM family: decision(x) < 0 is Malicious; 0 itself is Benign.
//   Isolation forest: anomaly score s(x) > threshold is Malicious.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "modelwarden/common/errors.h"
#include "modelwarden/common/io.h"
#include "modelwarden/features/features.h"

namespace modelwarden::detectors {

class NonConvergence : public Error {
 public:
  NonConvergence(std::size_t iterations, double violation);
  std::size_t iterations() const { return iterations_; }
  double violation() const { return violation_; }

 private:
  std::size_t iterations_;
  double violation_;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got);
};

class NotTrained : public Error {
 public:
  NotTrained() : Error("model was trained for zero epochs") {}
};

class NonFinite : public Error {
 public:
  using Error::Error;
};

class SchemaVersionMismatch : public ParseError {
 public:
  using ParseError::ParseError;
};

enum class Label { kBenign, kMalicious };
std::string_view label_name(Label label);

struct Verdict {
  Label label = Label::kBenign;
  double score = 0.0;
  bool malicious() const { return label == Label::kMalicious; }
};

enum class KernelKind { kLinear, kRbf, kSigmoid };

struct KernelSpec {
  KernelKind kind = KernelKind::kRbf;
  // Unset means "auto", which resolves to 1 / n_features.
  std::optional<double> gamma;
  double coef0 = 0.0;

  double resolved_gamma(std::size_t n_features) const;
  // "linear", "rbf:auto", "rbf:0.1", "sigmoid:1"
  std::string to_string() const;
  static KernelSpec parse(std::string_view text);
  bool operator==(const KernelSpec&) const = default;
};

// K(a, b) with an already resolved gamma.
double kernel(KernelKind kind, double gamma, double coef0, const double* a, const double* b,
              std::size_t n);

// ---------------------------------------------------------------- OCSVM

struct OcsvmOptions {
  double nu = 0.1;
  KernelSpec kernel;
  double tol = 1e-3;
  std::size_t max_iterations = 1'000'000;
};

struct OcsvmModel {
  KernelKind kernel = KernelKind::kRbf;
  double gamma = 1.0;  // resolved
  double coef0 = 0.0;
  std::string kernel_text;  // as requested, e.g. "rbf:auto"
  double nu = 0.1;
  std::size_t n_features = 0;
  std::vector<double> support_vectors;  // row-major, alphas.size() x n_features
  std::vector<double> alphas;           // 0 < alpha <= 1/(nu n), summing to 1
  std::vector<std::size_t> support_indices;  // training rows of the support vectors; not persisted
  double rho = 0.0;
  // Diagnostics from training.
  std::size_t n_train = 0;
  std::size_t iterations = 0;
  double objective = 0.0;  // 0.5 a'Qa at the solution
  double max_violation = 0.0;

  double decision(std::span<const double> x) const;
};

// Dual problem: min 0.5 a'Qa  s.t.  0 <= a_i <= 1/(nu n),  sum a = 1.
// Pairwise (SMO) updates; the first index of each pair is the maximal KKT
// violator, the second is chosen by second-order gain.
OcsvmModel train_ocsvm(const features::FeatureMatrix& x, const OcsvmOptions& options);

// Kernel-matrix cache shared across grid cells on the same rows. Holds
// pairwise squared distances or dot products, from which any gamma's
// kernel matrix is derived without touching the rows again.
class GramCache {
 public:
  explicit GramCache(const features::FeatureMatrix& x);
  const features::FeatureMatrix& rows() const { return *x_; }
  // Full n x n kernel matrix for the spec.
  std::vector<double> kernel_matrix(const KernelSpec& spec) const;

 private:
  const features::FeatureMatrix* x_;
  mutable std::vector<double> sqdist_;
  mutable std::vector<double> dots_;
};

OcsvmModel train_ocsvm(const GramCache& cache, const OcsvmOptions& options);

// Same solver on a caller-supplied n x n kernel matrix of x's rows.
OcsvmModel train_ocsvm_kernel(const features::FeatureMatrix& x, const std::vector<double>& q,
                              const OcsvmOptions& options);

// Kernel value from a precomputed squared distance (rbf) or dot product.
double kernel_from_parts(KernelKind kind, double gamma, double coef0, double sqdist, double dot);

// ------------------------------------------------------------- SGD-OCSVM

struct SgdOptions {
  double nu = 0.1;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  double eta0 = 0.05;
  std::uint64_t seed = 42;
};

struct SgdOcsvmModel {
  std::vector<double> weights;
  double offset = 0.0;
  double nu = 0.1;
  std::size_t batch_size = 32;
  std::size_t epochs = 0;
  double eta0 = 0.05;
  std::uint64_t seed = 42;

  bool trained() const { return epochs > 0; }
  double decision(std::span<const double> x) const;
};

// J(w, r) = 0.5 |w|^2 - r + 1/(nu m) sum_i max(0, r - <w, x_i>) over the rows
// of `x` listed in `batch` (all rows when empty). Averaged iterates are kept.
double sgd_objective(const features::FeatureMatrix& x, std::span<const double> w, double r,
                     double nu, std::span<const std::size_t> batch = {});
// Subgradient of sgd_objective; the last element is d/dr.
std::vector<double> sgd_subgradient(const features::FeatureMatrix& x, std::span<const double> w,
                                    double r, double nu, std::span<const std::size_t> batch = {});

SgdOcsvmModel train_sgd_ocsvm(const features::FeatureMatrix& x, const SgdOptions& options);

// ------------------------------------------------------- isolation forest

struct IsolationNode {
  // Leaf when feature < 0.
  std::int32_t feature = -1;
  double split = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::uint32_t size = 0;  // samples reaching a leaf
  // Leaves holding several identical rows keep that row, sparsely, as
  // [rep_begin, rep_begin + rep_size) of the tree's rep arrays.
  std::int32_t rep_begin = -1;
  std::uint32_t rep_size = 0;
};

struct IsolationTree {
  std::vector<IsolationNode> nodes;  // nodes[0] is the root
  std::vector<std::uint32_t> rep_index;
  std::vector<double> rep_value;

  // A point reaching a duplicate leaf but differing from its row is
  // isolated one level below the leaf instead of inheriting c(size).
  double path_length(std::span<const double> x) const;

 private:
  bool matches_rep(const IsolationNode& leaf, std::span<const double> x) const;
};

struct IforestOptions {
  std::size_t n_estimators = 100;
  std::size_t max_samples = 256;
  // Unset means "auto": the fixed 0.5 score rule.
  std::optional<double> contamination;
  std::uint64_t seed = 42;
};

struct IsolationForestModel {
  std::vector<IsolationTree> trees;
  std::size_t n_features = 0;
  std::size_t n_estimators = 0;
  std::size_t max_samples = 0;  // requested
  std::size_t subsample = 0;    // effective: min(max_samples, n)
  std::optional<double> contamination;
  double threshold = 0.5;
  std::uint64_t seed = 42;

  double score(std::span<const double> x) const;
};

// Average unsuccessful-search path length in a BST of n nodes, with the
// exact harmonic number: c(1) = 0, c(2) = 1.
double average_path_length(std::size_t n);

IsolationForestModel train_iforest(const features::FeatureMatrix& x, const IforestOptions& options);

// ------------------------------------------------------------- decisions

using AnyModel = std::variant<OcsvmModel, SgdOcsvmModel, IsolationForestModel>;

std::string_view kind_name(const AnyModel& model);
std::size_t input_width(const AnyModel& model);
// x is a scaled row of the training width.
Verdict decide(const AnyModel& model, std::span<const double> x);

// A trained model together with what is needed to score raw feature maps.
struct DetectorModel {
  AnyModel model;
  std::vector<std::string> columns;
  features::ScalerState scaler;
  std::string feature_set = "pres,freq";
  int ngram = 2;
  std::string vocabulary_hash;
  std::string hyperparameters;  // canonical cell key, e.g. "ocsvm nu=0.1 kernel=rbf:auto"

  Verdict decide_raw(std::span<const double> raw_row) const;
  Verdict decide_map(const FeatureMap& features) const;
};

constexpr std::string_view kSchemaId = "modelwarden.detector/1";

// JSON container with base64 blocks for numeric arrays.
Bytes save_model(const DetectorModel& model);
DetectorModel load_model(std::span<const std::uint8_t> data);

}  // namespace modelwarden::detectors

#endif  // MODELWARDEN_DETECTORS_DETECTORS_H_
