// Copyright 2026 The toha Authors
// SPDX-License-Identifier: Apache-2.0

// CSV cache of per-(sample, layer, head) divergences.
//
//   sample_id,layer,head,n_response,mtop_div,normalized
//
// Rows are ordered by sample (manifest order), then layer, then head. Reals
// are printed with 17 significant digits.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "toha/attn_store.hpp"
#include "toha/head_selector.hpp"

namespace toha {

inline constexpr const char* kCacheHeader = "sample_id,layer,head,n_response,mtop_div,normalized";

struct CacheRow {
  std::string sample_id;
  std::uint32_t layer = 0;
  std::uint32_t head = 0;
  std::uint32_t n_response = 0;
  double mtop_div = 0.0;
  double normalized = 0.0;

  friend bool operator==(const CacheRow&, const CacheRow&) = default;
};

struct DivergenceCache {
  std::vector<CacheRow> rows;

  std::string to_csv() const;
  static DivergenceCache from_csv(const std::string& text);

  /// Distinct (layer, head) pairs, sorted.
  std::vector<HeadId> head_grid() const;
  /// Sample ids in first-appearance order.
  std::vector<std::string> sample_ids() const;

  /// Throws ValidationError unless every sample covers the full head grid
  /// exactly once.
  void check_complete() const;
};

void write_cache(const DivergenceCache& cache, const std::filesystem::path& path);
DivergenceCache read_cache(const std::filesystem::path& path);

using LabelMap = std::map<std::string, std::optional<int>>;
LabelMap labels_from_manifest(const Manifest& m);

/// Table over `ids` (all cached samples when empty) with labels looked up in
/// `labels`. Ids missing from the cache are an error.
DivergenceTable build_table(const DivergenceCache& cache, const std::vector<std::string>& ids,
                            const LabelMap& labels);

}  // namespace toha
