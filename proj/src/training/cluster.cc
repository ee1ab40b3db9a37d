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

#include "modelwarden/training/training.h"

namespace modelwarden::training {

namespace {

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

// Population moments; syscalls absent from a summary count as zero.
Moments moments(const std::vector<const trace::SyscallSummary*>& xs, const std::string& name) {
  double sum = 0.0;
  for (const auto* s : xs) {
    const auto it = s->counts.find(name);
    if (it != s->counts.end()) sum += static_cast<double>(it->second);
  }
  Moments m;
  m.mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (const auto* s : xs) {
    const auto it = s->counts.find(name);
    const double d = (it != s->counts.end() ? static_cast<double>(it->second) : 0.0) - m.mean;
    ss += d * d;
  }
  m.sd = std::sqrt(ss / static_cast<double>(xs.size()));
  return m;
}

}  // namespace

ClusterStats cluster_divergence(const std::map<std::string, std::vector<trace::SyscallSummary>>& clusters,
                                std::size_t k) {
  if (clusters.size() < 2) throw TooFewClusters("need at least 2 clusters, got " + std::to_string(clusters.size()));
  ClusterStats stats;
  std::set<std::string> names;
  std::vector<const trace::SyscallSummary*> all;
  for (const auto& [tag, summaries] : clusters) {
    if (summaries.empty()) throw TooFewClusters("cluster '" + tag + "' is empty");
    stats.clusters.push_back(tag);
    for (const auto& s : summaries) {
      all.push_back(&s);
      for (const auto& [name, count] : s.counts) names.insert(name);
    }
  }

  std::vector<SyscallSpread> rows;
  for (const auto& name : names) {
    SyscallSpread row;
    row.syscall = name;
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto& [tag, summaries] : clusters) {
      std::vector<const trace::SyscallSummary*> xs;
      for (const auto& s : summaries) xs.push_back(&s);
      const Moments m = moments(xs, name);
      row.mean[tag] = m.mean;
      row.sd[tag] = m.sd;
      lo = first ? m.mean : std::min(lo, m.mean);
      hi = first ? m.mean : std::max(hi, m.mean);
      first = false;
    }
    row.spread = hi - lo;
    row.pooled_sd = moments(all, name).sd;
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [](const SyscallSpread& a, const SyscallSpread& b) {
    if (a.spread != b.spread) return a.spread > b.spread;
    return a.syscall < b.syscall;
  });
  if (rows.size() > k) rows.resize(k);
  stats.top = std::move(rows);
  return stats;
}

std::string cluster_stats_csv(const ClusterStats& stats) {
  std::vector<std::string> header = {"rank", "syscall", "spread"};
  for (const auto& c : stats.clusters) header.push_back("mean:" + c);
  for (const auto& c : stats.clusters) header.push_back("sd:" + c);
  header.push_back("sd:all");
  std::string out = join_csv_row(header) + "\n";
  for (std::size_t i = 0; i < stats.top.size(); ++i) {
    const auto& r = stats.top[i];
    std::vector<std::string> row = {std::to_string(i + 1), r.syscall, format_double(r.spread)};
    for (const auto& c : stats.clusters) row.push_back(format_double(r.mean.at(c)));
    for (const auto& c : stats.clusters) row.push_back(format_double(r.sd.at(c)));
    row.push_back(format_double(r.pooled_sd));
    out += join_csv_row(row) + "\n";
  }
  return out;
}

}  // namespace modelwarden::training
