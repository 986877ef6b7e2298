// Copyright 2026 The toha Authors
// SPDX-License-Identifier: Apache-2.0

// Head ranking by class separation and the probe/predict phases built on it.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "toha/attn_store.hpp"

namespace toha {

inline constexpr std::size_t kDefaultMaxHeads = 10;

/// Dense (sample x head) matrix of normalized divergences.
struct DivergenceTable {
  std::vector<HeadId> heads;
  std::vector<std::string> samples;
  std::vector<double> values;  // row-major, values[s * heads.size() + h]
  std::vector<std::optional<int>> labels;  // empty, or one entry per sample

  double at(std::size_t sample, std::size_t head) const { return values[sample * heads.size() + head]; }
  std::span<const double> row(std::size_t sample) const {
    return std::span<const double>(values).subspan(sample * heads.size(), heads.size());
  }
  std::optional<std::size_t> head_index(const HeadId& h) const;

  /// Throws ValidationError on shape mismatch, NaN, or a non-binary label.
  void validate() const;
};

struct ProbeBalance {
  std::size_t hallucinated = 0;
  std::size_t grounded = 0;
};

struct SelectionResult {
  std::vector<HeadId> ranked_heads;
  std::vector<double> deltas;  // aligned with ranked_heads
  std::size_t n_opt = 1;
  std::size_t n_max = kDefaultMaxHeads;  // after clamping to |heads|
  std::vector<double> probe_auroc_trace;  // entry N-1 is the AUROC with the top N heads
  double best_auroc = 0.0;
  ProbeBalance balance;
  std::vector<std::string> warnings;

  std::span<const HeadId> selected() const { return std::span<const HeadId>(ranked_heads).first(n_opt); }
};

/// mean(hallucinated) - mean(grounded).
double delta(std::span<const double> hallucinated, std::span<const double> grounded);

/// Mann-Whitney AUROC: P(score+ > score-) + P(score+ == score-) / 2.
/// Labels are 1 (positive) or 0. O(m log m).
double auroc(std::span<const int> labels, std::span<const double> scores);

/// Ranks heads by delta over the labeled table and picks the number of top
/// heads whose averaged score maximizes probe AUROC (first strict maximum).
SelectionResult select_heads(const DivergenceTable& probe, std::size_t n_max = kDefaultMaxHeads,
                             int threads = 1);

/// Per-sample mean over the first n_opt ranked heads.
std::vector<double> predict(const DivergenceTable& test, const SelectionResult& selection);

}  // namespace toha
