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
#include <cstdlib>
#include <set>

#include "modelwarden/corpus/corpus.h"

namespace modelwarden::corpus {

namespace {

const CsvRow kMetadataColumns = {"id",          "cluster",       "likes",        "downloads",
                                 "last_commit", "security_flag", "artifact_path"};

std::int64_t parse_int(const std::string& field, const std::string& what, const std::string& id) {
  if (field.empty()) return 0;
  try {
    std::size_t used = 0;
    const long long v = std::stoll(field, &used);
    if (used == field.size()) return v;
  } catch (const std::exception&) {
  }
  throw ParseError("entry " + id + ": bad " + what + " '" + field + "'");
}

}  // namespace

fs::path default_home() {
  if (const char* home = std::getenv("MODELWARDEN_HOME"); home && *home) return home;
  if (const char* user = std::getenv("HOME"); user && *user) return fs::path(user) / ".modelwarden";
  return ".modelwarden";
}

ArtifactKind artifact_kind(const fs::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".pkl" || ext == ".pickle" || ext == ".pt" || ext == ".pth" || ext == ".bin") {
    return ArtifactKind::kPickle;
  }
  if (ext == ".strace" || ext == ".trace" || ext == ".log") return ArtifactKind::kTrace;
  if (ext == ".summary") return ArtifactKind::kSummary;
  return ArtifactKind::kUnknown;
}

std::vector<std::string> RegistryEntry::artifacts() const {
  std::vector<std::string> out;
  for (const auto& part : split(artifact_path, ';')) {
    const auto t = trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

Registry Registry::parse_metadata(std::string_view csv, const fs::path& root) {
  const auto rows = parse_csv(csv);
  if (rows.empty()) throw MissingMetadata("metadata CSV is empty");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].size(); ++i) col[std::string(trim(rows[0][i]))] = i;
  for (const auto& name : kMetadataColumns) {
    if (!col.contains(name)) throw MissingMetadata("metadata CSV lacks column '" + name + "'");
  }
  Registry reg;
  reg.root_ = root;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && trim(row[0]).empty()) continue;
    auto field = [&](const std::string& name) -> std::string {
      const std::size_t i = col.at(name);
      return i < row.size() ? std::string(trim(row[i])) : std::string();
    };
    RegistryEntry e;
    e.id = field("id");
    e.cluster = field("cluster");
    if (e.id.empty()) throw MissingMetadata("row " + std::to_string(r + 1) + " has no id");
    if (e.cluster.empty()) throw MissingMetadata("entry " + e.id + " has no cluster");
    if (!seen.insert(e.id).second) throw DuplicateId(e.id);
    e.likes = parse_int(field("likes"), "likes", e.id);
    e.downloads = parse_int(field("downloads"), "downloads", e.id);
    e.last_commit = field("last_commit");
    e.security_flag = field("security_flag");
    e.artifact_path = field("artifact_path");
    bool usable = false;
    for (const auto& a : e.artifacts()) {
      if (!fs::exists(root / a)) throw MissingMetadata("entry " + e.id + ": missing artifact " + a);
      usable = usable || artifact_kind(a) != ArtifactKind::kUnknown;
    }
    if (!usable) throw MissingMetadata("entry " + e.id + " has neither a pickle nor a trace");
    reg.entries_.push_back(std::move(e));
  }
  std::sort(reg.entries_.begin(), reg.entries_.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  return reg;
}

Registry Registry::ingest(const fs::path& dir) {
  const fs::path meta = dir / "metadata.csv";
  if (!fs::exists(meta)) throw MissingMetadata("no metadata.csv in " + dir.string());
  return parse_metadata(read_file_text(meta), fs::absolute(dir).lexically_normal());
}

std::string Registry::export_csv() const {
  std::string out = join_csv_row(kMetadataColumns) + "\n";
  for (const auto& e : entries_) {
    out += join_csv_row({e.id, e.cluster, std::to_string(e.likes), std::to_string(e.downloads),
                         e.last_commit, e.security_flag, e.artifact_path}) +
           "\n";
  }
  return out;
}

void Registry::save(const fs::path& file) const {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  write_file_text(file, "# root: " + root_.string() + "\n" + export_csv());
}

Registry Registry::load(const fs::path& file) {
  const std::string text = read_file_text(file);
  constexpr std::string_view kPrefix = "# root: ";
  if (!text.starts_with(kPrefix)) throw ParseError("not a registry file: " + file.string());
  const auto eol = text.find('\n');
  const fs::path root = text.substr(kPrefix.size(), eol - kPrefix.size());
  return parse_metadata(std::string_view(text).substr(eol == std::string::npos ? text.size() : eol + 1),
                        root);
}

const RegistryEntry& Registry::at(std::string_view id) const {
  const auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                                   [](const RegistryEntry& e, std::string_view k) { return e.id < k; });
  if (it == entries_.end() || it->id != id) throw Error("no registry entry " + std::string(id));
  return *it;
}

std::vector<const RegistryEntry*> Registry::benign_pool(std::string_view cluster) const {
  std::vector<const RegistryEntry*> out;
  for (const auto& e : entries_) {
    if (!e.flagged() && (cluster.empty() || e.cluster == cluster)) out.push_back(&e);
  }
  return out;
}

std::optional<fs::path> Registry::pickle_path(const RegistryEntry& e) const {
  for (const auto& a : e.artifacts()) {
    if (artifact_kind(a) == ArtifactKind::kPickle) return root_ / a;
  }
  return std::nullopt;
}

std::optional<fs::path> Registry::trace_path(const RegistryEntry& e) const {
  for (const auto& a : e.artifacts()) {
    const auto k = artifact_kind(a);
    if (k == ArtifactKind::kTrace || k == ArtifactKind::kSummary) return root_ / a;
  }
  return std::nullopt;
}

}  // namespace modelwarden::corpus
