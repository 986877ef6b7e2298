// Copyright 2026 The toha Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "toha/error.hpp"
#include "toha/graph_topology.hpp"

using namespace toha;

namespace {

DistanceGraph constant_graph(std::size_t n, std::size_t p, double d) {
  SymmetricMatrix m(n);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) m.set(i, j, d);
  }
  return DistanceGraph(std::move(m), p);
}

// d(0,2)=0.9, d(1,2)=0.4, d(0,3)=0.8, d(1,3)=0.7, d(2,3)=0.2, d(0,1) arbitrary.
DistanceGraph four_token(double d01 = 0.55) {
  SymmetricMatrix m(4);
  m.set(0, 1, d01);
  m.set(0, 2, 0.9);
  m.set(1, 2, 0.4);
  m.set(0, 3, 0.8);
  m.set(1, 3, 0.7);
  m.set(2, 3, 0.2);
  return DistanceGraph(std::move(m), 2);
}

DistanceGraph permuted(const DistanceGraph& g, std::mt19937_64& rng) {
  // Relabel within P and within R; the partition is preserved.
  std::vector<std::size_t> perm(g.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(g.prompt_len()), rng);
  std::shuffle(perm.begin() + static_cast<std::ptrdiff_t>(g.prompt_len()), perm.end(), rng);
  SymmetricMatrix m(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) m.set(perm[i], perm[j], g(i, j));
  }
  return DistanceGraph(std::move(m), g.prompt_len());
}

}  // namespace

TEST_CASE("attention weights map to pseudo-distances 1 - w") {
  AttentionContainer c = make_container(1, 1, 2, 1);
  c.weights = {1.0f, 1.0f, 0.0f};
  CHECK(to_distance_graph(c.map(0, 0), 1)(0, 1) == 0.0);
  c.weights = {1.0f, 0.0f, 1.0f};
  CHECK(to_distance_graph(c.map(0, 0), 1)(0, 1) == 1.0);

  AttentionContainer three = make_container(1, 1, 3, 1);
  three.weights = {1.0f, 0.3f, 0.7f, 0.2f, 0.5f, 0.3f};
  auto g = to_distance_graph(three.map(0, 0), 1);
  CHECK(g(0, 1) == doctest::Approx(0.7).epsilon(1e-7));
  CHECK(g(0, 2) == doctest::Approx(0.8).epsilon(1e-7));
  CHECK(g(1, 2) == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(g(1, 0) == g(0, 1));
  CHECK(g(2, 2) == 0.0);
  CHECK(g(2, 1) == 1.0 - double{0.5f});
}

TEST_CASE("graph construction validates partition and range") {
  CHECK_THROWS_AS(constant_graph(3, 0, 0.5), ValidationError);
  CHECK_THROWS_AS(constant_graph(3, 3, 0.5), ValidationError);
  CHECK_THROWS_AS(constant_graph(3, 1, 1.5), ValidationError);
  CHECK_THROWS_AS(constant_graph(3, 1, std::nan("")), ValidationError);
}

TEST_CASE("mtop_div on the reference graphs") {
  SUBCASE("full attention gives zero divergence") {
    auto g = constant_graph(6, 2, 0.0);
    CHECK(mtop_div(g).total_length == 0.0);
    CHECK(normalized_divergence(g) == 0.0);
    auto bc = barcode0(g);
    REQUIRE(bc.intervals.size() == 4);
    for (const auto& iv : bc.intervals) {
      CHECK(iv.birth == 0.0);
      CHECK(iv.death == 0.0);
    }
  }
  SUBCASE("no attention reaches the upper bound |R|") {
    auto g = constant_graph(7, 3, 1.0);
    CHECK(mtop_div(g).total_length == 4.0);
    CHECK(normalized_divergence(g) == 1.0);
  }
  SUBCASE("four-token graph") {
    for (double d01 : {0.0, 0.55, 1.0}) {
      auto g = four_token(d01);
      auto msf = mtop_div(g);
      CHECK(msf.total_length == doctest::Approx(0.6).epsilon(1e-15));
      REQUIRE(msf.edges.size() == 2);
      CHECK(msf.edges[0] == Edge{2, 3, 0.2});
      CHECK(msf.edges[1] == Edge{1, 2, 0.4});
      CHECK(oracle::brute_force_msf(g) == msf.total_length);
      CHECK(normalized_divergence(g) == doctest::Approx(0.3).epsilon(1e-15));
      auto bc = barcode0(g);
      REQUIRE(bc.intervals.size() == 2);
      CHECK(bc.intervals[0].death == 0.2);
      CHECK(bc.intervals[1].death == 0.4);
    }
  }
}

TEST_CASE("tie-breaking picks the smallest endpoints") {
  // Every edge has length 0.5: the witness must be ((0,2), (0,3), (0,4)).
  auto g = constant_graph(5, 2, 0.5);
  auto msf = mtop_div_kruskal(g);
  REQUIRE(msf.edges.size() == 3);
  CHECK(msf.edges[0] == Edge{0, 2, 0.5});
  CHECK(msf.edges[1] == Edge{0, 3, 0.5});
  CHECK(msf.edges[2] == Edge{0, 4, 0.5});
}

TEST_CASE("mst_length") {
  SymmetricMatrix tri(3);
  tri.set(0, 1, 0.2);
  tri.set(1, 2, 0.4);
  tri.set(0, 2, 0.9);
  std::vector<std::size_t> one{1};
  std::vector<std::size_t> all{0, 1, 2};
  CHECK(mst_length(tri, one) == 0.0);
  CHECK(mst_length(tri, all) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK_THROWS_AS(mst_length(tri, std::vector<std::size_t>{}), ValidationError);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = oracle::random_graph(rng, 8, 3);
    std::vector<std::size_t> five{0, 2, 3, 5, 7};
    auto brute = oracle::brute_force_mst(g.matrix(), five);
    CHECK(brute.trees == 125);
    CHECK(mst_length(g.matrix(), five) == brute.min_length);
  }
}

TEST_CASE("Kruskal and Prim agree") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    auto g = oracle::random_graph_between(rng, 2, 60);
    auto k = mtop_div_kruskal(g);
    auto p = mtop_div_prim(g);
    CHECK(std::abs(k.total_length - p.total_length) <= 1e-12);
    CHECK(k.edges.size() == g.response_len());
    CHECK(p.edges.size() == g.response_len());
  }
  auto big = oracle::random_graph(rng, 600, 200);
  CHECK(std::abs(mtop_div_kruskal(big).total_length - mtop_div_prim(big).total_length) <= 1e-12);
}

TEST_CASE("matches exhaustive forest search on small graphs") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    auto g = oracle::random_graph_between(rng, 2, 6);
    CHECK(std::abs(mtop_div(g).total_length - oracle::brute_force_msf(g)) <= 1e-12);
  }
}

TEST_CASE("forest properties on random graphs") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    auto g = oracle::random_graph_between(rng, 2, 40);
    const auto msf = mtop_div(g);
    const double r = static_cast<double>(g.response_len());

    // bounds
    CHECK(msf.total_length >= 0.0);
    CHECK(msf.total_length <= r);

    // forest shape: |R| edges, each touching R, and they attach R to P
    CHECK(msf.edges.size() == g.response_len());
    std::vector<oracle::RawEdge> raw;
    for (const auto& e : msf.edges) raw.push_back({e.u, e.v, e.weight});
    CHECK(oracle::connects_all(std::min<std::size_t>(g.size(), 64), g.prompt_len(), raw));

    // barcode sums to the forest length exactly
    CHECK(barcode0(g).total_length() == msf.total_length);

    // lower bound
    CHECK(msf.total_length >= mst_length_full(g) - mst_length_prompt(g) - 1e-12);

    // stability
    const double eps = 0.2 * unit(rng);
    SymmetricMatrix shaken(g.size());
    for (std::size_t i = 1; i < g.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        shaken.set(i, j, std::clamp(g(i, j) + eps * (2.0 * unit(rng) - 1.0), 0.0, 1.0));
      }
    }
    DistanceGraph g2(std::move(shaken), g.prompt_len());
    CHECK(std::abs(mtop_div(g2).total_length - msf.total_length) <= eps * r + 1e-12);

    // relabeling within P and within R leaves the total unchanged
    CHECK(mtop_div(permuted(g, rng)).total_length == msf.total_length);
  }
}

TEST_CASE("zero divergence iff zero-length edges attach every response token") {
  std::mt19937_64 rng(31);
  std::bernoulli_distribution zero(0.35);
  std::uniform_real_distribution<double> pos(0.01, 1.0);
  int zero_cases = 0, positive_cases = 0;
  for (int trial = 0; trial < 400; ++trial) {
    std::size_t n = std::uniform_int_distribution<std::size_t>(2, 10)(rng);
    std::size_t p = std::uniform_int_distribution<std::size_t>(1, n - 1)(rng);
    SymmetricMatrix m(n);
    std::vector<oracle::RawEdge> zero_edges;
    for (std::size_t i = 1; i < n; ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        bool z = zero(rng);
        m.set(i, j, z ? 0.0 : pos(rng));
        if (z && i >= p) zero_edges.push_back({j, i, 0.0});
      }
    }
    DistanceGraph g(std::move(m), p);
    bool attachable = oracle::connects_all(n, p, zero_edges);
    bool is_zero = mtop_div(g).total_length == 0.0;
    CHECK(attachable == is_zero);
    (is_zero ? zero_cases : positive_cases) += 1;
  }
  CHECK(zero_cases > 20);
  CHECK(positive_cases > 20);
}
