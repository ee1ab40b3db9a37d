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
#include <random>

#include "modelwarden/detectors/detectors.h"

namespace modelwarden::detectors {

double average_path_length(std::size_t n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  double harmonic = 0.0;
  for (std::size_t k = 1; k < n; ++k) harmonic += 1.0 / static_cast<double>(k);
  const auto dn = static_cast<double>(n);
  return 2.0 * harmonic - 2.0 * (dn - 1.0) / dn;
}

double IsolationTree::path_length(std::span<const double> x) const {
  std::size_t node = 0;
  double depth = 0.0;
  while (nodes[node].feature >= 0) {
    const auto& n = nodes[node];
    node = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.split ? n.left
                                                                                     : n.right);
    depth += 1.0;
  }
  const auto& leaf = nodes[node];
  if (leaf.rep_begin >= 0 && !matches_rep(leaf, x)) return depth + 1.0;
  return depth + average_path_length(leaf.size);
}

bool IsolationTree::matches_rep(const IsolationNode& leaf, std::span<const double> x) const {
  const auto begin = static_cast<std::size_t>(leaf.rep_begin);
  std::size_t k = begin;
  const std::size_t end = begin + leaf.rep_size;
  for (std::size_t f = 0; f < x.size(); ++f) {
    double expected = 0.0;
    if (k < end && rep_index[k] == f) expected = rep_value[k++];
    if (x[f] != expected) return false;
  }
  return true;
}

double IsolationForestModel::score(std::span<const double> x) const {
  if (x.size() != n_features) throw DimensionMismatch(n_features, x.size());
  const double c = average_path_length(subsample);
  if (trees.empty() || c == 0.0) return 0.5;
  double total = 0.0;
  for (const auto& t : trees) total += t.path_length(x);
  return std::exp2(-(total / static_cast<double>(trees.size())) / c);
}

namespace {

struct Pending {
  std::int32_t node;
  std::size_t lo, hi;  // range in the index buffer
  std::size_t depth;
};

IsolationTree build_tree(const features::FeatureMatrix& x, std::vector<std::size_t> sample,
                         std::size_t height_limit, std::mt19937_64& rng) {
  IsolationTree tree;
  tree.nodes.emplace_back();
  std::vector<Pending> stack{{0, 0, sample.size(), 0}};
  std::vector<std::size_t> candidates;
  std::vector<double> lo_v, hi_v;
  while (!stack.empty()) {
    const Pending p = stack.back();
    stack.pop_back();
    const std::size_t size = p.hi - p.lo;
    auto leaf = [&] { tree.nodes[static_cast<std::size_t>(p.node)].size = static_cast<std::uint32_t>(size); };
    if (size <= 1 || p.depth >= height_limit) {
      leaf();
      continue;
    }
    // Split only on features that vary within the node.
    candidates.clear();
    lo_v.assign(x.cols(), 0.0);
    hi_v.assign(x.cols(), 0.0);
    for (std::size_t c = 0; c < x.cols(); ++c) {
      double lo = x.at(sample[p.lo], c), hi = lo;
      for (std::size_t k = p.lo + 1; k < p.hi; ++k) {
        const double v = x.at(sample[k], c);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi > lo) {
        candidates.push_back(c);
        lo_v[c] = lo;
        hi_v[c] = hi;
      }
    }
    if (candidates.empty()) {
      leaf();
      auto& node = tree.nodes[static_cast<std::size_t>(p.node)];
      node.rep_begin = static_cast<std::int32_t>(tree.rep_index.size());
      for (std::size_t c = 0; c < x.cols(); ++c) {
        const double v = x.at(sample[p.lo], c);
        if (v != 0.0) {
          tree.rep_index.push_back(static_cast<std::uint32_t>(c));
          tree.rep_value.push_back(v);
        }
      }
      node.rep_size = static_cast<std::uint32_t>(tree.rep_index.size()) -
                      static_cast<std::uint32_t>(node.rep_begin);
      continue;
    }
    const std::size_t f =
        candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
    const double split = std::uniform_real_distribution<double>(lo_v[f], hi_v[f])(rng);
    const auto mid = std::partition(sample.begin() + static_cast<std::ptrdiff_t>(p.lo),
                                    sample.begin() + static_cast<std::ptrdiff_t>(p.hi),
                                    [&](std::size_t r) { return x.at(r, f) < split; });
    const auto mid_index = static_cast<std::size_t>(mid - sample.begin());
    const auto left = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[static_cast<std::size_t>(p.node)];
    node.feature = static_cast<std::int32_t>(f);
    node.split = split;
    node.left = left;
    node.right = left + 1;
    stack.push_back({left + 1, mid_index, p.hi, p.depth + 1});
    stack.push_back({left, p.lo, mid_index, p.depth + 1});
  }
  return tree;
}

}  // namespace

IsolationForestModel train_iforest(const features::FeatureMatrix& x, const IforestOptions& options) {
  if (x.rows() == 0) throw features::EmptyMatrix();
  if (options.n_estimators == 0) throw Error("n_estimators must be positive");
  if (options.max_samples == 0) throw Error("max_samples must be positive");
  if (options.contamination && !(*options.contamination > 0.0 && *options.contamination <= 0.5)) {
    throw Error("contamination must be in (0, 0.5]");
  }
  IsolationForestModel m;
  m.n_features = x.cols();
  m.n_estimators = options.n_estimators;
  m.max_samples = options.max_samples;
  m.subsample = std::min(options.max_samples, x.rows());
  m.contamination = options.contamination;
  m.seed = options.seed;
  const auto height_limit = static_cast<std::size_t>(
      std::ceil(std::log2(static_cast<double>(std::max<std::size_t>(m.subsample, 2)))));

  std::vector<std::size_t> all(x.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t t = 0; t < options.n_estimators; ++t) {
    std::mt19937_64 rng(derive_seed(options.seed, "tree:" + std::to_string(t)));
    // Partial Fisher-Yates: the first `subsample` entries form the sample.
    std::vector<std::size_t> pool = all;
    for (std::size_t k = 0; k < m.subsample; ++k) {
      const std::size_t pick = std::uniform_int_distribution<std::size_t>(k, pool.size() - 1)(rng);
      std::swap(pool[k], pool[pick]);
    }
    pool.resize(m.subsample);
    m.trees.push_back(build_tree(x, std::move(pool), height_limit, rng));
  }

  if (!options.contamination) {
    m.threshold = 0.5;
  } else {
    std::vector<double> scores(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      scores[r] = m.score(std::span<const double>(x.row(r), x.cols()));
    }
    std::sort(scores.begin(), scores.end(), std::greater<>());
    const auto k = static_cast<std::size_t>(
        std::floor(*options.contamination * static_cast<double>(x.rows())));
    // At most k training rows score strictly above the k-th highest score.
    m.threshold = scores[std::min(k, scores.size() - 1)];
  }
  return m;
}

}  // namespace modelwarden::detectors
