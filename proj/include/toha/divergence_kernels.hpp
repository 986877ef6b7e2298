// Copyright 2026 The toha Authors
// SPDX-License-Identifier: Apache-2.0

// Batch divergence kernels. One task is one (sample, layer, head) triple;
// results land in a preallocated slot per task so the parallel and serial
// paths produce identical output in identical order.

#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "toha/attn_store.hpp"

namespace toha {

enum class ScoreVariant {
  kMtopDiv,      // forest attaching R to P, normalized by |R|
  kMstFullGraph  // MST of the whole graph, normalized by n - 1
};

ScoreVariant parse_variant(const std::string& s);
std::string variant_name(ScoreVariant v);

struct DivergenceCell {
  std::uint32_t n_response = 0;
  double raw = 0.0;
  double normalized = 0.0;

  friend bool operator==(const DivergenceCell&, const DivergenceCell&) = default;
};

DivergenceCell head_divergence(const TriangularView& map, std::size_t prompt_len, ScoreVariant variant);

/// `out` must hold n_layers * n_heads cells per container, filled in
/// (container, layer, head) order. All containers must share n_layers and
/// n_heads.
void compute_divergences_serial(std::span<const AttentionContainer* const> batch, ScoreVariant variant,
                                std::span<DivergenceCell> out);

void compute_divergences_parallel(std::span<const AttentionContainer* const> batch, ScoreVariant variant,
                                  std::span<DivergenceCell> out, int threads);

/// `requested` is a positive count or "auto"; TOHA_THREADS wins when set.
int resolve_threads(const std::string& requested);

}  // namespace toha
