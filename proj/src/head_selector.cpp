// Copyright 2026 The toha Authors
// SPDX-License-Identifier: Apache-2.0

#include "toha/head_selector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include <omp.h>

#include "toha/error.hpp"

namespace toha {

std::optional<std::size_t> DivergenceTable::head_index(const HeadId& h) const {
  for (std::size_t i = 0; i < heads.size(); ++i) {
    if (heads[i] == h) return i;
  }
  return std::nullopt;
}

void DivergenceTable::validate() const {
  if (values.size() != samples.size() * heads.size()) throw ValidationError("divergence table shape mismatch");
  if (!labels.empty() && labels.size() != samples.size()) {
    throw ValidationError("divergence table has " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(samples.size()) + " samples");
  }
  for (double v : values) {
    if (std::isnan(v)) throw ValidationError("NaN in divergence table");
  }
  for (const auto& l : labels) {
    if (l && *l != 0 && *l != 1) throw ValidationError("non-binary label in divergence table");
  }
}

double delta(std::span<const double> hallucinated, std::span<const double> grounded) {
  if (hallucinated.empty() || grounded.empty()) throw ValidationError("delta needs samples from both classes");
  double sh = 0.0;
  for (double v : hallucinated) sh += v;
  double sg = 0.0;
  for (double v : grounded) sg += v;
  return sh / static_cast<double>(hallucinated.size()) - sg / static_cast<double>(grounded.size());
}

double auroc(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw ValidationError("auroc: labels and scores differ in length");
  std::uint64_t n_pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ValidationError("auroc: labels must be 0 or 1");
    if (std::isnan(scores[i])) throw ValidationError("auroc: NaN score");
    n_pos += static_cast<std::uint64_t>(labels[i]);
  }
  const std::uint64_t m = labels.size();
  const std::uint64_t n_neg = m - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ValidationError("auroc needs both positive and negative labels");

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the positive rank sum, using mid-ranks for ties: a tie group at
  // sorted positions [i, j) has 1-based mid-rank (i + 1 + j) / 2.
  std::uint64_t rank_sum2 = 0;
  for (std::size_t i = 0; i < m;) {
    std::size_t j = i + 1;
    while (j < m && scores[order[j]] == scores[order[i]]) ++j;
    std::uint64_t positives = 0;
    for (std::size_t k = i; k < j; ++k) positives += static_cast<std::uint64_t>(labels[order[k]]);
    rank_sum2 += positives * (i + 1 + j);
    i = j;
  }
  const std::uint64_t u2 = rank_sum2 - n_pos * (n_pos + 1);
  return (static_cast<double>(u2) / 2.0) / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

SelectionResult select_heads(const DivergenceTable& probe, std::size_t n_max, int threads) {
  probe.validate();
  const std::size_t n_heads = probe.heads.size();
  const std::size_t n_samples = probe.samples.size();
  if (n_heads == 0) throw ValidationError("no heads to select from");
  if (n_max == 0) throw ValidationError("n_max must be at least 1");
  if (probe.labels.size() != n_samples) throw ValidationError("probe table is unlabeled");

  SelectionResult result;
  std::vector<int> labels(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    if (!probe.labels[s]) throw ValidationError("probe sample '" + probe.samples[s] + "' has no label");
    labels[s] = *probe.labels[s];
    (labels[s] == 1 ? result.balance.hallucinated : result.balance.grounded) += 1;
  }
  if (result.balance.hallucinated == 0 || result.balance.grounded == 0) {
    throw ValidationError("probe set must contain both hallucinated and grounded samples");
  }
  if (n_max > n_heads) {
    result.warnings.push_back("n_max=" + std::to_string(n_max) + " exceeds the " + std::to_string(n_heads) +
                              " available heads; clamped");
    n_max = n_heads;
  }
  result.n_max = n_max;

  std::vector<double> head_delta(n_heads);
#pragma omp parallel for num_threads(std::max(threads, 1)) schedule(static)
  for (std::size_t h = 0; h < n_heads; ++h) {
    std::vector<double> hallu, grounded;
    hallu.reserve(result.balance.hallucinated);
    grounded.reserve(result.balance.grounded);
    for (std::size_t s = 0; s < n_samples; ++s) (labels[s] == 1 ? hallu : grounded).push_back(probe.at(s, h));
    head_delta[h] = delta(hallu, grounded);
  }

  std::vector<std::size_t> rank(n_heads);
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    if (head_delta[a] != head_delta[b]) return head_delta[a] > head_delta[b];
    return probe.heads[a] < probe.heads[b];
  });
  for (std::size_t h : rank) {
    result.ranked_heads.push_back(probe.heads[h]);
    result.deltas.push_back(head_delta[h]);
  }

  // p_N = ((N-1)/N) p_{N-1} + d/N, carried as a running sum so that p_N is
  // bit-identical to the top-N mean that predict() computes.
  std::vector<double> sum(n_samples, 0.0), p(n_samples, 0.0);
  double best = 0.0;
  result.n_opt = 1;
  for (std::size_t n = 1; n <= n_max; ++n) {
    const std::size_t col = rank[n - 1];
    for (std::size_t s = 0; s < n_samples; ++s) {
      sum[s] += probe.at(s, col);
      p[s] = sum[s] / static_cast<double>(n);
    }
    double a = auroc(labels, p);
    result.probe_auroc_trace.push_back(a);
    if (a > best) {
      best = a;
      result.n_opt = n;
    }
  }
  result.best_auroc = result.probe_auroc_trace[result.n_opt - 1];
  return result;
}

std::vector<double> predict(const DivergenceTable& test, const SelectionResult& selection) {
  test.validate();
  if (selection.n_opt == 0 || selection.n_opt > selection.ranked_heads.size()) {
    throw ValidationError("selection has an invalid n_opt");
  }
  std::vector<std::size_t> cols;
  for (const auto& h : selection.selected()) {
    auto idx = test.head_index(h);
    if (!idx) {
      throw ValidationError("head (" + std::to_string(h.layer) + ", " + std::to_string(h.head) +
                            ") missing from table");
    }
    cols.push_back(*idx);
  }
  std::vector<double> scores(test.samples.size());
  for (std::size_t s = 0; s < scores.size(); ++s) {
    double sum = 0.0;
    for (std::size_t c : cols) sum += test.at(s, c);
    scores[s] = sum / static_cast<double>(cols.size());
  }
  return scores;
}

}  // namespace toha
