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

#include <type_traits>

#include "json.hpp"
#include "modelwarden/detectors/detectors.h"

namespace modelwarden::detectors {

using nlohmann::json;

std::string_view kind_name(const AnyModel& model) {
  switch (model.index()) {
    case 0:
      return "ocsvm";
    case 1:
      return "sgd-ocsvm";
    default:
      return "iforest";
  }
}

std::size_t input_width(const AnyModel& model) {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SgdOcsvmModel>) {
          return m.weights.size();
        } else {
          return m.n_features;
        }
      },
      model);
}

Verdict decide(const AnyModel& model, std::span<const double> x) {
  return std::visit(
      [&](const auto& m) -> Verdict {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, IsolationForestModel>) {
          const double s = m.score(x);
          return {s > m.threshold ? Label::kMalicious : Label::kBenign, s};
        } else {
          const double d = m.decision(x);
          return {d < 0.0 ? Label::kMalicious : Label::kBenign, d};
        }
      },
      model);
}

Verdict DetectorModel::decide_raw(std::span<const double> raw_row) const {
  if (raw_row.size() != columns.size()) throw DimensionMismatch(columns.size(), raw_row.size());
  std::vector<double> row(raw_row.begin(), raw_row.end());
  features::transform_row(scaler, row);
  return decide(model, row);
}

Verdict DetectorModel::decide_map(const FeatureMap& features) const {
  const auto m = features::vectorize({features}, columns);
  return decide_raw(std::span<const double>(m.row(0), m.cols()));
}

namespace {

std::string blob(std::span<const double> v) { return encode_doubles(v); }

std::vector<double> unblob(const json& j, const char* key) {
  return decode_doubles(j.at(key).get<std::string>());
}

json to_json(const OcsvmModel& m) {
  return {{"kernel", m.kernel_text},
          {"gamma", m.gamma},
          {"coef0", m.coef0},
          {"nu", m.nu},
          {"n_features", m.n_features},
          {"n_train", m.n_train},
          {"iterations", m.iterations},
          {"objective", m.objective},
          {"max_violation", m.max_violation},
          {"rho", m.rho},
          {"alphas", blob(m.alphas)},
          {"support_vectors", blob(m.support_vectors)}};
}

OcsvmModel ocsvm_from_json(const json& j) {
  OcsvmModel m;
  m.kernel_text = j.at("kernel").get<std::string>();
  const KernelSpec spec = KernelSpec::parse(m.kernel_text);
  m.kernel = spec.kind;
  m.gamma = j.at("gamma").get<double>();
  m.coef0 = j.at("coef0").get<double>();
  m.nu = j.at("nu").get<double>();
  m.n_features = j.at("n_features").get<std::size_t>();
  m.n_train = j.at("n_train").get<std::size_t>();
  m.iterations = j.at("iterations").get<std::size_t>();
  m.objective = j.at("objective").get<double>();
  m.max_violation = j.at("max_violation").get<double>();
  m.rho = j.at("rho").get<double>();
  m.alphas = unblob(j, "alphas");
  m.support_vectors = unblob(j, "support_vectors");
  if (m.support_vectors.size() != m.alphas.size() * m.n_features) {
    throw ParseError("support vector block has the wrong size");
  }
  return m;
}

json to_json(const SgdOcsvmModel& m) {
  return {{"nu", m.nu},          {"batch_size", m.batch_size}, {"epochs", m.epochs},
          {"eta0", m.eta0},      {"seed", m.seed},             {"offset", m.offset},
          {"weights", blob(m.weights)}};
}

SgdOcsvmModel sgd_from_json(const json& j) {
  SgdOcsvmModel m;
  m.nu = j.at("nu").get<double>();
  m.batch_size = j.at("batch_size").get<std::size_t>();
  m.epochs = j.at("epochs").get<std::size_t>();
  m.eta0 = j.at("eta0").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.offset = j.at("offset").get<double>();
  m.weights = unblob(j, "weights");
  return m;
}

json to_json(const IsolationForestModel& m) {
  json trees = json::array();
  for (const auto& t : m.trees) {
    std::vector<std::int32_t> feature, left, right, rep_begin;
    std::vector<std::uint32_t> size, rep_size;
    std::vector<double> split;
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      left.push_back(n.left);
      right.push_back(n.right);
      size.push_back(n.size);
      split.push_back(n.split);
      rep_begin.push_back(n.rep_begin);
      rep_size.push_back(n.rep_size);
    }
    trees.push_back({{"feature", feature},
                     {"left", left},
                     {"right", right},
                     {"size", size},
                     {"split", blob(split)},
                     {"rep_begin", rep_begin},
                     {"rep_size", rep_size},
                     {"rep_index", t.rep_index},
                     {"rep_value", blob(t.rep_value)}});
  }
  json j = {{"n_features", m.n_features},
            {"n_estimators", m.n_estimators},
            {"max_samples", m.max_samples},
            {"subsample", m.subsample},
            {"threshold", m.threshold},
            {"seed", m.seed},
            {"trees", trees}};
  j["contamination"] = m.contamination ? json(*m.contamination) : json("auto");
  return j;
}

IsolationForestModel iforest_from_json(const json& j) {
  IsolationForestModel m;
  m.n_features = j.at("n_features").get<std::size_t>();
  m.n_estimators = j.at("n_estimators").get<std::size_t>();
  m.max_samples = j.at("max_samples").get<std::size_t>();
  m.subsample = j.at("subsample").get<std::size_t>();
  m.threshold = j.at("threshold").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  if (j.at("contamination").is_number()) m.contamination = j.at("contamination").get<double>();
  for (const auto& t : j.at("trees")) {
    const auto feature = t.at("feature").get<std::vector<std::int32_t>>();
    const auto left = t.at("left").get<std::vector<std::int32_t>>();
    const auto right = t.at("right").get<std::vector<std::int32_t>>();
    const auto size = t.at("size").get<std::vector<std::uint32_t>>();
    const auto split = unblob(t, "split");
    const auto rep_begin = t.at("rep_begin").get<std::vector<std::int32_t>>();
    const auto rep_size = t.at("rep_size").get<std::vector<std::uint32_t>>();
    const std::size_t n = feature.size();
    if (left.size() != n || right.size() != n || size.size() != n || split.size() != n ||
        rep_begin.size() != n || rep_size.size() != n || n == 0) {
      throw ParseError("isolation tree arrays disagree in length");
    }
    IsolationTree tree;
    tree.rep_index = t.at("rep_index").get<std::vector<std::uint32_t>>();
    tree.rep_value = unblob(t, "rep_value");
    if (tree.rep_index.size() != tree.rep_value.size()) {
      throw ParseError("isolation tree rep arrays disagree in length");
    }
    for (std::size_t i = 0; i < n; ++i) {
      const bool inner = feature[i] >= 0;
      if (inner && (static_cast<std::size_t>(feature[i]) >= m.n_features || left[i] <= 0 ||
                    right[i] <= 0 || static_cast<std::size_t>(left[i]) >= n ||
                    static_cast<std::size_t>(right[i]) >= n)) {
        throw ParseError("isolation tree node " + std::to_string(i) + " is out of range");
      }
      if (rep_begin[i] >= 0 &&
          static_cast<std::size_t>(rep_begin[i]) + rep_size[i] > tree.rep_index.size()) {
        throw ParseError("isolation tree node " + std::to_string(i) + " rep is out of range");
      }
      tree.nodes.push_back(
          {feature[i], split[i], left[i], right[i], size[i], rep_begin[i], rep_size[i]});
    }
    m.trees.push_back(std::move(tree));
  }
  return m;
}

}  // namespace

Bytes save_model(const DetectorModel& model) {
  json j;
  j["schema"] = kSchemaId;
  j["kind"] = kind_name(model.model);
  j["hyperparameters"] = model.hyperparameters;
  j["vocabulary_hash"] = model.vocabulary_hash;
  j["feature_set"] = model.feature_set;
  j["ngram"] = model.ngram;
  j["columns"] = model.columns;
  j["scaler"] = {{"scale", blob(model.scaler.scale)}};
  j["parameters"] = std::visit([](const auto& m) { return to_json(m); }, model.model);
  const std::string text = j.dump(1) + "\n";
  return Bytes(text.begin(), text.end());
}

DetectorModel load_model(std::span<const std::uint8_t> data) {
  json j;
  try {
    j = json::parse(data.begin(), data.end());
  } catch (const json::exception&) {
    throw SchemaVersionMismatch("not a detector container (unparseable header)");
  }
  if (!j.is_object() || !j.contains("schema") || !j["schema"].is_string()) {
    throw SchemaVersionMismatch("not a detector container (no schema id)");
  }
  const std::string schema = j["schema"].get<std::string>();
  if (schema != kSchemaId) {
    throw SchemaVersionMismatch("detector schema '" + schema + "', expected '" +
                                std::string(kSchemaId) + "'");
  }
  try {
    DetectorModel m;
    const std::string kind = j.at("kind").get<std::string>();
    const json& p = j.at("parameters");
    if (kind == "ocsvm") {
      m.model = ocsvm_from_json(p);
    } else if (kind == "sgd-ocsvm") {
      m.model = sgd_from_json(p);
    } else if (kind == "iforest") {
      m.model = iforest_from_json(p);
    } else {
      throw ParseError("unknown detector kind '" + kind + "'");
    }
    m.hyperparameters = j.at("hyperparameters").get<std::string>();
    m.vocabulary_hash = j.at("vocabulary_hash").get<std::string>();
    m.feature_set = j.at("feature_set").get<std::string>();
    m.ngram = j.at("ngram").get<int>();
    m.columns = j.at("columns").get<std::vector<std::string>>();
    m.scaler.columns = m.columns;
    m.scaler.scale = unblob(j.at("scaler"), "scale");
    if (m.scaler.scale.size() != m.columns.size() || input_width(m.model) != m.columns.size()) {
      throw ParseError("detector container widths disagree");
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed detector container: ") + e.what());
  }
}

}  // namespace modelwarden::detectors
