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

#ifndef MODELWARDEN_COMMON_IO_H_
#define MODELWARDEN_COMMON_IO_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace modelwarden {

using Bytes = std::vector<std::uint8_t>;

Bytes read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> data);
void write_file_text(const std::filesystem::path& path, std::string_view text);

// Shortest round-trip decimal form of a double ("%.17g"-free, via to_chars).
std::string format_double(double value);

// Fixed-point decimal of num/den rounded half-to-even at `places` digits.
// Requires den > 0 and 0 <= num.
std::string format_ratio_half_even(std::uint64_t num, std::uint64_t den,
                                   int places);

std::string base64_encode(std::span<const std::uint8_t> data);
Bytes base64_decode(std::string_view text);

// Little-endian packing of doubles, used for base64 numeric blocks.
std::string encode_doubles(std::span<const double> values);
std::vector<double> decode_doubles(std::string_view base64);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view text,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

// Mixes a run seed with a stable key into an independent stream seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key);

// Minimal RFC 4180 CSV support.
using CsvRow = std::vector<std::string>;
std::vector<CsvRow> parse_csv(std::string_view text);
std::string csv_escape(std::string_view field);
std::string join_csv_row(const CsvRow& row);

std::vector<std::string> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);

}  // namespace modelwarden

#endif  // MODELWARDEN_COMMON_IO_H_
