// Copyright 2026 The toha Authors
// SPDX-License-Identifier: Apache-2.0

// Serial vs OpenMP divergence kernels, and Kruskal vs Prim for one graph.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "toha/divergence_kernels.hpp"
#include "toha/graph_topology.hpp"
#include "toha/synth.hpp"

namespace {

using namespace toha;

std::vector<AttentionContainer> make_batch(std::uint32_t n_samples, std::uint32_t n_tokens) {
  SyntheticSpec spec;
  spec.n_layers = 8;
  spec.n_heads = 8;
  spec.n_samples = n_samples;
  spec.n_tokens_min = spec.n_tokens_max = n_tokens;
  spec.prompt_len_min = spec.prompt_len_max = n_tokens / 3;
  std::vector<AttentionContainer> out;
  for (std::uint32_t i = 0; i < n_samples; ++i) out.push_back(synthesize_sample(spec, i, static_cast<int>(i % 2)));
  return out;
}

void run_batch(benchmark::State& state, bool parallel) {
  auto batch = make_batch(8, static_cast<std::uint32_t>(state.range(0)));
  std::vector<const AttentionContainer*> ptrs;
  for (const auto& c : batch) ptrs.push_back(&c);
  std::vector<DivergenceCell> out(batch.size() * 64);
  for (auto _ : state) {
    if (parallel) {
      compute_divergences_parallel(ptrs, ScoreVariant::kMtopDiv, out, resolve_threads("auto"));
    } else {
      compute_divergences_serial(ptrs, ScoreVariant::kMtopDiv, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(out.size()));
}

void BM_DivergenceSerial(benchmark::State& state) { run_batch(state, false); }
void BM_DivergenceParallel(benchmark::State& state) { run_batch(state, true); }

DistanceGraph random_graph(std::size_t n) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SymmetricMatrix m(n);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) m.set(i, j, u(rng));
  }
  return DistanceGraph(std::move(m), n / 3);
}

void BM_Kruskal(benchmark::State& state) {
  auto g = random_graph(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mtop_div_kruskal(g).total_length);
}

void BM_Prim(benchmark::State& state) {
  auto g = random_graph(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mtop_div_prim(g).total_length);
}

}  // namespace

BENCHMARK(BM_DivergenceSerial)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DivergenceParallel)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Kruskal)->Arg(128)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Prim)->Arg(128)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
