// Copyright 2026 The toha Authors
// SPDX-License-Identifier: Apache-2.0

#include "toha/divergence_cache.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "toha/error.hpp"
#include "toha/io_util.hpp"

namespace toha {

std::string DivergenceCache::to_csv() const {
  std::string out = kCacheHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += r.sample_id;
    out += ',';
    out += std::to_string(r.layer);
    out += ',';
    out += std::to_string(r.head);
    out += ',';
    out += std::to_string(r.n_response);
    out += ',';
    out += format_double(r.mtop_div);
    out += ',';
    out += format_double(r.normalized);
    out += '\n';
  }
  return out;
}

DivergenceCache DivergenceCache::from_csv(const std::string& text) {
  auto lines = split(text, '\n');
  if (lines.empty() || lines.front() != kCacheHeader) throw FormatError("divergence cache: missing or bad header");
  DivergenceCache cache;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) {
      if (i + 1 == lines.size()) break;
      throw FormatError("divergence cache: blank line " + std::to_string(i + 1));
    }
    auto f = split(lines[i], ',');
    if (f.size() != 6) throw FormatError("divergence cache: line " + std::to_string(i + 1) + " needs 6 fields");
    CacheRow r;
    r.sample_id = std::string(f[0]);
    r.layer = static_cast<std::uint32_t>(parse_u64(f[1]));
    r.head = static_cast<std::uint32_t>(parse_u64(f[2]));
    r.n_response = static_cast<std::uint32_t>(parse_u64(f[3]));
    r.mtop_div = parse_double(f[4]);
    r.normalized = parse_double(f[5]);
    cache.rows.push_back(std::move(r));
  }
  return cache;
}

std::vector<HeadId> DivergenceCache::head_grid() const {
  std::set<HeadId> grid;
  for (const auto& r : rows) grid.insert({r.layer, r.head});
  return {grid.begin(), grid.end()};
}

std::vector<std::string> DivergenceCache::sample_ids() const {
  std::vector<std::string> ids;
  for (const auto& r : rows) {
    if (ids.empty() || ids.back() != r.sample_id) ids.push_back(r.sample_id);
  }
  return ids;
}

void DivergenceCache::check_complete() const {
  const auto grid = head_grid();
  std::unordered_map<std::string, std::set<HeadId>> seen;
  for (const auto& r : rows) {
    if (!seen[r.sample_id].insert({r.layer, r.head}).second) {
      throw ValidationError("divergence cache: duplicate row for sample " + r.sample_id);
    }
  }
  for (const auto& [id, heads] : seen) {
    if (heads.size() != grid.size()) {
      throw ValidationError("divergence cache: sample " + id + " covers " + std::to_string(heads.size()) + " of " +
                            std::to_string(grid.size()) + " heads");
    }
  }
}

void write_cache(const DivergenceCache& cache, const std::filesystem::path& path) {
  write_file_atomic(path, cache.to_csv());
}

DivergenceCache read_cache(const std::filesystem::path& path) {
  auto cache = DivergenceCache::from_csv(read_file(path));
  cache.check_complete();
  return cache;
}

LabelMap labels_from_manifest(const Manifest& m) {
  LabelMap labels;
  for (const auto& s : m.samples) labels[s.id] = s.label;
  return labels;
}

DivergenceTable build_table(const DivergenceCache& cache, const std::vector<std::string>& ids,
                            const LabelMap& labels) {
  DivergenceTable t;
  t.heads = cache.head_grid();
  t.samples = ids.empty() ? cache.sample_ids() : ids;

  std::unordered_map<std::string, std::size_t> sample_index;
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    if (!sample_index.emplace(t.samples[i], i).second) {
      throw ValidationError("sample id listed twice: " + t.samples[i]);
    }
  }
  std::map<HeadId, std::size_t> head_index;
  for (std::size_t i = 0; i < t.heads.size(); ++i) head_index[t.heads[i]] = i;

  const std::size_t n_heads = t.heads.size();
  t.values.assign(t.samples.size() * n_heads, 0.0);
  std::vector<std::size_t> filled(t.samples.size(), 0);
  for (const auto& r : cache.rows) {
    auto it = sample_index.find(r.sample_id);
    if (it == sample_index.end()) continue;
    t.values[it->second * n_heads + head_index.at({r.layer, r.head})] = r.normalized;
    ++filled[it->second];
  }
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    if (filled[i] != n_heads) throw ValidationError("sample " + t.samples[i] + " missing from divergence cache");
  }

  t.labels.resize(t.samples.size());
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    if (auto it = labels.find(t.samples[i]); it != labels.end()) t.labels[i] = it->second;
  }
  t.validate();
  return t;
}

}  // namespace toha
