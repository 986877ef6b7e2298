// Copyright 2026 The toha Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace toha {

/// Writes `content` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// 17 significant digits (%.17g); round-trips exactly through parse_double.
std::string format_double(double v);

/// Strict full-string parse; throws FormatError on junk.
double parse_double(std::string_view s);
std::uint64_t parse_u64(std::string_view s);

/// Either a file with one id per line or an inline comma-separated list.
std::vector<std::string> read_id_list(const std::string& spec);
void write_id_list(const std::filesystem::path& path, const std::vector<std::string>& ids);

/// 64-bit FNV-1a, used for config digests.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

std::vector<std::string_view> split(std::string_view s, char sep);

}  // namespace toha
