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

#include "modelwarden/pickle/container.h"

#include <zlib.h>

#include <cstring>

namespace modelwarden::pickle {

namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;

std::uint32_t rd(std::span<const std::uint8_t> d, std::size_t at, int width) {
  if (at + static_cast<std::size_t>(width) > d.size()) throw BadArchive("zip record out of bounds");
  std::uint32_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint32_t>(d[at + i]) << (8 * i);
  return v;
}

void wr(Bytes& out, std::uint32_t v, int width) {
  for (int i = 0; i < width; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

Bytes inflate_raw(std::span<const std::uint8_t> in, std::size_t expected) {
  Bytes out(expected);
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw Error("zlib init failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || zs.total_out != expected) throw BadArchive("corrupt deflate member");
  return out;
}

Bytes deflate_raw(std::span<const std::uint8_t> in) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 8,
                   Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error("zlib init failed");
  }
  Bytes out(deflateBound(&zs, static_cast<uLong>(in.size())));
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error("deflate failed");
  out.resize(zs.total_out);
  return out;
}

std::uint32_t crc_of(std::span<const std::uint8_t> d) {
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), d.data(), static_cast<uInt>(d.size())));
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

bool is_zip(std::span<const std::uint8_t> data) {
  return data.size() >= 4 && rd(data, 0, 4) == kLocalSig;
}

std::vector<ZipMember> read_zip(std::span<const std::uint8_t> data) {
  if (data.size() < 22) throw BadArchive("zip too short");
  std::size_t eocd = data.size() - 22;
  while (rd(data, eocd, 4) != kEndSig) {
    if (eocd == 0 || data.size() - eocd > 22 + 0xFFFF) throw BadArchive("no end of central directory");
    --eocd;
  }
  const std::uint32_t count = rd(data, eocd + 10, 2);
  std::size_t at = rd(data, eocd + 16, 4);
  std::vector<ZipMember> members;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (rd(data, at, 4) != kCentralSig) throw BadArchive("bad central directory entry");
    const auto method = static_cast<std::uint16_t>(rd(data, at + 10, 2));
    const std::uint32_t crc = rd(data, at + 16, 4);
    const std::uint32_t csize = rd(data, at + 20, 4);
    const std::uint32_t usize = rd(data, at + 24, 4);
    const std::uint32_t name_len = rd(data, at + 28, 2);
    const std::uint32_t extra_len = rd(data, at + 30, 2);
    const std::uint32_t comment_len = rd(data, at + 32, 2);
    const std::uint32_t local = rd(data, at + 42, 4);
    if (csize == 0xFFFFFFFF || usize == 0xFFFFFFFF || local == 0xFFFFFFFF) {
      throw BadArchive("zip64 archives are not supported");
    }
    if (at + 46 + name_len > data.size()) throw BadArchive("zip name out of bounds");
    ZipMember m;
    m.name.assign(reinterpret_cast<const char*>(data.data()) + at + 46, name_len);
    m.method = method;
    if (rd(data, local, 4) != kLocalSig) throw BadArchive("bad local header for " + m.name);
    const std::size_t body =
        local + 30 + rd(data, local + 26, 2) + rd(data, local + 28, 2);
    if (body + csize > data.size()) throw BadArchive("member data out of bounds: " + m.name);
    const auto raw = data.subspan(body, csize);
    if (method == 0) {
      m.data.assign(raw.begin(), raw.end());
    } else if (method == 8) {
      m.data = inflate_raw(raw, usize);
    } else {
      throw BadArchive("unsupported compression method " + std::to_string(method));
    }
    if (crc_of(m.data) != crc) throw BadArchive("crc mismatch for " + m.name);
    members.push_back(std::move(m));
    at += 46 + name_len + extra_len + comment_len;
  }
  return members;
}

Bytes write_zip(const std::vector<ZipMember>& members) {
  Bytes out;
  Bytes central;
  for (const auto& m : members) {
    const Bytes payload = m.method == 8 ? deflate_raw(m.data) : m.data;
    const std::uint32_t crc = crc_of(m.data);
    const auto offset = static_cast<std::uint32_t>(out.size());
    // Fixed DOS timestamp (1980-01-01) keeps output reproducible.
    const std::uint32_t dos_time = 0, dos_date = 0x21;
    wr(out, kLocalSig, 4);
    wr(out, 20, 2);
    wr(out, 0, 2);
    wr(out, m.method, 2);
    wr(out, dos_time, 2);
    wr(out, dos_date, 2);
    wr(out, crc, 4);
    wr(out, static_cast<std::uint32_t>(payload.size()), 4);
    wr(out, static_cast<std::uint32_t>(m.data.size()), 4);
    wr(out, static_cast<std::uint32_t>(m.name.size()), 2);
    wr(out, 0, 2);
    out.insert(out.end(), m.name.begin(), m.name.end());
    out.insert(out.end(), payload.begin(), payload.end());

    wr(central, kCentralSig, 4);
    wr(central, 20, 2);
    wr(central, 20, 2);
    wr(central, 0, 2);
    wr(central, m.method, 2);
    wr(central, dos_time, 2);
    wr(central, dos_date, 2);
    wr(central, crc, 4);
    wr(central, static_cast<std::uint32_t>(payload.size()), 4);
    wr(central, static_cast<std::uint32_t>(m.data.size()), 4);
    wr(central, static_cast<std::uint32_t>(m.name.size()), 2);
    wr(central, 0, 2);
    wr(central, 0, 2);
    wr(central, 0, 2);
    wr(central, 0, 2);
    wr(central, 0, 4);
    wr(central, offset, 4);
    central.insert(central.end(), m.name.begin(), m.name.end());
  }
  const auto central_offset = static_cast<std::uint32_t>(out.size());
  out.insert(out.end(), central.begin(), central.end());
  wr(out, kEndSig, 4);
  wr(out, 0, 2);
  wr(out, 0, 2);
  wr(out, static_cast<std::uint32_t>(members.size()), 2);
  wr(out, static_cast<std::uint32_t>(members.size()), 2);
  wr(out, static_cast<std::uint32_t>(central.size()), 4);
  wr(out, central_offset, 4);
  wr(out, 0, 2);
  return out;
}

PickleArtifact open_artifact(std::span<const std::uint8_t> data) {
  PickleArtifact artifact;
  if (!is_zip(data)) {
    artifact.pickle.assign(data.begin(), data.end());
    return artifact;
  }
  artifact.archive = read_zip(data);
  std::size_t found = artifact.archive.size();
  for (std::size_t i = 0; i < artifact.archive.size() && found == artifact.archive.size(); ++i) {
    if (ends_with(artifact.archive[i].name, "data.pkl")) found = i;
  }
  for (std::size_t i = 0; i < artifact.archive.size() && found == artifact.archive.size(); ++i) {
    if (ends_with(artifact.archive[i].name, ".pkl")) found = i;
  }
  if (found == artifact.archive.size()) throw BadArchive("archive has no .pkl member");
  artifact.member = found;
  artifact.pickle = artifact.archive[found].data;
  return artifact;
}

Bytes rebuild_artifact(const PickleArtifact& artifact, std::span<const std::uint8_t> pickle) {
  if (!artifact.in_archive()) return Bytes(pickle.begin(), pickle.end());
  std::vector<ZipMember> members = artifact.archive;
  members[artifact.member].data.assign(pickle.begin(), pickle.end());
  return write_zip(members);
}

}  // namespace modelwarden::pickle
