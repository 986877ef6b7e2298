// Copyright 2026 The toha Authors
// SPDX-License-Identifier: Apache-2.0

#include "toha/divergence_kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <vector>

#include <omp.h>

#include "toha/error.hpp"
#include "toha/graph_topology.hpp"
#include "toha/io_util.hpp"

namespace toha {

ScoreVariant parse_variant(const std::string& s) {
  if (s == "mtop" || s == "mtop_div_normalized") return ScoreVariant::kMtopDiv;
  if (s == "mst" || s == "mst_full_graph") return ScoreVariant::kMstFullGraph;
  throw ValidationError("unknown score variant '" + s + "' (expected mtop or mst)");
}

std::string variant_name(ScoreVariant v) {
  return v == ScoreVariant::kMtopDiv ? "mtop_div_normalized" : "mst_full_graph";
}

DivergenceCell head_divergence(const TriangularView& map, std::size_t prompt_len, ScoreVariant variant) {
  DistanceGraph g = to_distance_graph(map, prompt_len);
  DivergenceCell cell;
  cell.n_response = static_cast<std::uint32_t>(g.response_len());
  if (variant == ScoreVariant::kMtopDiv) {
    cell.raw = mtop_div(g).total_length;
    cell.normalized = cell.raw / static_cast<double>(g.response_len());
  } else {
    cell.raw = mst_length_full(g);
    cell.normalized = cell.raw / static_cast<double>(g.size() - 1);
  }
  return cell;
}

namespace {

struct TaskGrid {
  std::size_t heads_per_sample;
  std::uint32_t n_heads;
};

TaskGrid check_batch(std::span<const AttentionContainer* const> batch, std::span<DivergenceCell> out) {
  if (batch.empty()) {
    if (!out.empty()) throw ValidationError("output span size does not match batch");
    return {0, 0};
  }
  const auto n_layers = batch.front()->n_layers;
  const auto n_heads = batch.front()->n_heads;
  for (const auto* c : batch) {
    if (c->n_layers != n_layers || c->n_heads != n_heads) throw ValidationError("batch mixes head grids");
  }
  const std::size_t per = std::size_t{n_layers} * n_heads;
  if (out.size() != per * batch.size()) throw ValidationError("output span size does not match batch");
  return {per, n_heads};
}

DivergenceCell run_task(std::span<const AttentionContainer* const> batch, const TaskGrid& grid, std::size_t task,
                        ScoreVariant variant) {
  const auto& c = *batch[task / grid.heads_per_sample];
  const std::size_t local = task % grid.heads_per_sample;
  const auto layer = static_cast<std::uint32_t>(local / grid.n_heads);
  const auto head = static_cast<std::uint32_t>(local % grid.n_heads);
  return head_divergence(c.map(layer, head), c.prompt_len, variant);
}

}  // namespace

void compute_divergences_serial(std::span<const AttentionContainer* const> batch, ScoreVariant variant,
                                std::span<DivergenceCell> out) {
  TaskGrid grid = check_batch(batch, out);
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = run_task(batch, grid, t, variant);
}

void compute_divergences_parallel(std::span<const AttentionContainer* const> batch, ScoreVariant variant,
                                  std::span<DivergenceCell> out, int threads) {
  TaskGrid grid = check_batch(batch, out);
  const auto n_tasks = static_cast<std::int64_t>(out.size());
  // Exceptions must not escape an OpenMP region; the first one is rethrown.
  std::exception_ptr failure;
#pragma omp parallel for num_threads(std::max(threads, 1)) schedule(dynamic, 16)
  for (std::int64_t t = 0; t < n_tasks; ++t) {
    try {
      out[static_cast<std::size_t>(t)] = run_task(batch, grid, static_cast<std::size_t>(t), variant);
    } catch (...) {
#pragma omp critical(toha_kernel_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

int resolve_threads(const std::string& requested) {
  std::string spec = requested;
  if (const char* env = std::getenv("TOHA_THREADS"); env != nullptr && *env != '\0') spec = env;
  if (spec.empty() || spec == "auto") return std::max(omp_get_max_threads(), 1);
  std::uint64_t n = 0;
  try {
    n = parse_u64(spec);
  } catch (const FormatError&) {
    throw ValidationError("thread count must be a positive integer or 'auto', got '" + spec + "'");
  }
  if (n == 0 || n > 4096) throw ValidationError("thread count out of range: " + spec);
  return static_cast<int>(n);
}

}  // namespace toha
