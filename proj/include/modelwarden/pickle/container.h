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

#ifndef MODELWARDEN_PICKLE_CONTAINER_H_
#define MODELWARDEN_PICKLE_CONTAINER_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "modelwarden/common/errors.h"
#include "modelwarden/common/io.h"

namespace modelwarden::pickle {

class BadArchive : public ParseError {
 public:
  using ParseError::ParseError;
};

struct ZipMember {
  std::string name;
  Bytes data;               // uncompressed
  std::uint16_t method = 0; // 0 stored, 8 deflated
};

bool is_zip(std::span<const std::uint8_t> data);
// Reads through the central directory. No zip64, no encryption.
std::vector<ZipMember> read_zip(std::span<const std::uint8_t> data);
Bytes write_zip(const std::vector<ZipMember>& members);

// A pickle stream either standing alone or embedded in a zip container
// (first member named */data.pkl, else the first *.pkl member).
struct PickleArtifact {
  Bytes pickle;
  std::vector<ZipMember> archive;  // empty for a bare pickle
  std::size_t member = 0;

  bool in_archive() const { return !archive.empty(); }
  std::string member_name() const { return in_archive() ? archive[member].name : ""; }
};

PickleArtifact open_artifact(std::span<const std::uint8_t> data);
// Same container with the pickle stream replaced.
Bytes rebuild_artifact(const PickleArtifact& artifact, std::span<const std::uint8_t> pickle);

}  // namespace modelwarden::pickle

#endif  // MODELWARDEN_PICKLE_CONTAINER_H_
