// Copyright 2026 The toha Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end commands behind the CLI. Every function here is deterministic
// in its inputs; thread counts only change wall time.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "toha/attn_store.hpp"
#include "toha/divergence_cache.hpp"
#include "toha/divergence_kernels.hpp"
#include "toha/head_selector.hpp"

namespace toha {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitPartial = 2 };

struct DivergenceOptions {
  ScoreVariant variant = ScoreVariant::kMtopDiv;
  int threads = 1;
  bool serial_reference = false;  // use the serial kernel
  std::size_t chunk_samples = 64;  // containers held in memory at once
};

struct SampleFailure {
  std::string sample_id;
  std::string message;
};

struct DivergenceRun {
  DivergenceCache cache;
  std::vector<SampleFailure> failures;
};

DivergenceRun compute_divergence_cache(const std::filesystem::path& manifest_path, const DivergenceOptions& options);

/// Writes the cache atomically; failures go to `<out>.errors`. Returns
/// kExitPartial when any sample was skipped.
int cmd_divergence(const std::filesystem::path& manifest_path, const std::filesystem::path& out,
                   const DivergenceOptions& options);

struct SelectionReport {
  SelectionResult result;
  std::vector<std::string> probe_ids;
  std::uint64_t seed = 0;
  std::string config_digest;

  std::string to_json() const;
  static SelectionReport from_json(const std::string& text);
};

SelectionReport run_select(const DivergenceCache& cache, const LabelMap& labels,
                           const std::vector<std::string>& probe_ids, std::size_t n_max, std::uint64_t seed,
                           int threads = 1);

struct ProbeTestSplit {
  std::vector<std::string> probe;
  std::vector<std::string> test;
};

/// Shuffles the labeled cached samples with `seed`, takes
/// round(test_fraction * N) of them as the test set and up to `probe_size`
/// of the remainder as the probe set.
ProbeTestSplit make_split(const DivergenceCache& cache, const LabelMap& labels, std::uint64_t seed,
                          double test_fraction, std::size_t probe_size);

using ScoreList = std::vector<std::pair<std::string, double>>;

ScoreList run_score(const DivergenceCache& cache, const SelectionReport& selection,
                    const std::vector<std::string>& test_ids);
std::string scores_to_csv(const ScoreList& scores);
ScoreList scores_from_csv(const std::string& text);

struct EvalMetrics {
  double auroc = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;

  std::string to_json() const;
};

EvalMetrics run_eval(const ScoreList& scores, const LabelMap& labels);

struct HeadDeltaRow {
  HeadId head;
  double delta_a = 0.0;
  double delta_b = 0.0;
};

/// Per-head delta over all labeled samples of each cache.
std::vector<HeadDeltaRow> run_analyze(const DivergenceCache& a, const LabelMap& labels_a, const DivergenceCache& b,
                                      const LabelMap& labels_b);
std::string deltas_to_csv(const std::vector<HeadDeltaRow>& rows);

}  // namespace toha
