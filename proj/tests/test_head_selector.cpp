// Copyright 2026 The toha Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "toha/error.hpp"
#include "toha/head_selector.hpp"

using namespace toha;

namespace {

DivergenceTable make_table(std::vector<HeadId> heads, std::vector<std::vector<double>> rows, std::vector<int> labels) {
  DivergenceTable t;
  t.heads = std::move(heads);
  for (std::size_t s = 0; s < rows.size(); ++s) {
    t.samples.push_back("s" + std::to_string(s));
    t.values.insert(t.values.end(), rows[s].begin(), rows[s].end());
    if (!labels.empty()) t.labels.emplace_back(labels[s]);
  }
  return t;
}

DivergenceTable random_table(std::mt19937_64& rng, std::size_t n_samples, std::size_t n_heads) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DivergenceTable t;
  for (std::uint32_t h = 0; h < n_heads; ++h) t.heads.push_back({h / 4, h % 4});
  for (std::size_t s = 0; s < n_samples; ++s) {
    t.samples.push_back("s" + std::to_string(s));
    t.labels.emplace_back(s < 2 ? static_cast<int>(s) : static_cast<int>(rng() & 1));
    for (std::size_t h = 0; h < n_heads; ++h) {
      // Quantized values produce ties in both deltas and scores.
      t.values.push_back(std::round(u(rng) * 20.0) / 20.0);
    }
  }
  return t;
}

}  // namespace

TEST_CASE("delta is the difference of class means") {
  std::vector<double> a{0.8, 0.6}, b{0.2, 0.4};
  CHECK(delta(a, a) == 0.0);
  CHECK(delta(a, b) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(delta(std::vector<double>{0.1}, std::vector<double>{0.9}) == doctest::Approx(-0.8).epsilon(1e-15));
  CHECK_THROWS_AS(delta(std::vector<double>{}, b), ValidationError);
}

TEST_CASE("auroc examples") {
  CHECK(auroc(std::vector<int>{1, 1, 0, 0}, std::vector<double>{0.9, 0.8, 0.2, 0.1}) == 1.0);
  CHECK(auroc(std::vector<int>{1, 0, 1, 0}, std::vector<double>{0.5, 0.5, 0.5, 0.5}) == 0.5);
  CHECK(auroc(std::vector<int>{1, 0, 1, 0}, std::vector<double>{0.7, 0.7, 0.3, 0.1}) == 0.625);
  CHECK_THROWS_AS(auroc(std::vector<int>{1, 1}, std::vector<double>{0.1, 0.2}), ValidationError);
  CHECK_THROWS_AS(auroc(std::vector<int>{1, 2}, std::vector<double>{0.1, 0.2}), ValidationError);
  CHECK_THROWS_AS(auroc(std::vector<int>{1, 0}, std::vector<double>{0.1}), ValidationError);
}

TEST_CASE("auroc matches pair counting and its symmetries") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t m = std::uniform_int_distribution<std::size_t>(2, 150)(rng);
    std::vector<int> y(m);
    std::vector<double> s(m), neg(m), warped(m);
    for (std::size_t i = 0; i < m; ++i) {
      y[i] = i < 2 ? static_cast<int>(i) : static_cast<int>(rng() & 1);
      s[i] = static_cast<double>(rng() % 30) / 29.0;
      neg[i] = -s[i];
      warped[i] = s[i] * s[i] * s[i] + 2.0 * s[i];
    }
    const double a = auroc(y, s);
    CHECK(a == oracle::pairwise_auroc(y, s));
    CHECK(auroc(y, warped) == a);

    std::vector<double> distinct(m);
    for (std::size_t i = 0; i < m; ++i) distinct[i] = static_cast<double>(rng()) / 1e19;
    std::vector<double> flipped(m);
    for (std::size_t i = 0; i < m; ++i) flipped[i] = -distinct[i];
    CHECK(auroc(y, distinct) + auroc(y, flipped) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("select_heads on a hand-traced table stops at one head") {
  // labels 1,1,0,0. Head A separates perfectly (delta 0.7); averaging in
  // head B (delta 0.05) gives means 0.45, 0.9, 0.55, 0.05 -> AUROC 3/4.
  auto t = make_table({{0, 0}, {0, 1}}, {{0.9, 0.0}, {0.8, 1.0}, {0.2, 0.9}, {0.1, 0.0}}, {1, 1, 0, 0});
  auto r = select_heads(t, 10);
  CHECK(r.n_opt == 1);
  CHECK(r.n_max == 2);
  REQUIRE(r.probe_auroc_trace.size() == 2);
  CHECK(r.probe_auroc_trace[0] == 1.0);
  CHECK(r.probe_auroc_trace[1] == 0.75);
  CHECK(r.best_auroc == 1.0);
  CHECK(r.ranked_heads[0] == HeadId{0, 0});
  CHECK(r.deltas[0] == doctest::Approx(0.7));
  CHECK(r.deltas[1] == doctest::Approx(0.05));
  CHECK(r.balance.hallucinated == 2);
  CHECK(r.balance.grounded == 2);
  REQUIRE(r.warnings.size() == 1);  // n_max clamped from 10 to 2
}

TEST_CASE("planted head ranks first; equal deltas fall back to (layer, head)") {
  std::vector<HeadId> heads{{1, 1}, {0, 3}, {1, 0}, {0, 2}};
  // Head (1,0) is planted; the other three have delta 0.
  auto t = make_table(heads, {{0.5, 0.5, 1.0, 0.5}, {0.5, 0.5, 1.0, 0.5}, {0.5, 0.5, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5}},
                      {1, 1, 0, 0});
  auto r = select_heads(t, 4);
  CHECK(r.ranked_heads[0] == HeadId{1, 0});
  CHECK(r.deltas[0] == doctest::Approx(0.5));
  CHECK(r.ranked_heads[1] == HeadId{0, 2});
  CHECK(r.ranked_heads[2] == HeadId{0, 3});
  CHECK(r.ranked_heads[3] == HeadId{1, 1});
}

TEST_CASE("select_heads input errors") {
  auto one_class = make_table({{0, 0}}, {{0.1}, {0.2}}, {0, 0});
  CHECK_THROWS_AS(select_heads(one_class), ValidationError);
  auto unlabeled = make_table({{0, 0}}, {{0.1}, {0.2}}, {});
  CHECK_THROWS_AS(select_heads(unlabeled), ValidationError);
  auto ok = make_table({{0, 0}}, {{0.1}, {0.2}}, {0, 1});
  CHECK_THROWS_AS(select_heads(ok, 0), ValidationError);
  auto r = select_heads(ok, 1);
  CHECK(r.n_opt == 1);
  CHECK(r.probe_auroc_trace.size() == 1);
}

TEST_CASE("running mean equals the direct top-N mean and n_opt matches the naive transcription") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 30; ++trial) {
    auto t = random_table(rng, 40, 16);
    auto r = select_heads(t, 10);
    auto naive = oracle::naive_select(t, 10);
    CHECK(r.n_opt == naive.n_opt);
    CHECK(r.best_auroc == doctest::Approx(naive.best_auroc).epsilon(1e-12));
    // The literal recurrence p <- ((N-1)/N) p + d/N stays within 1e-12 of the
    // direct mean; predict() reproduces the probe trace exactly.
    std::vector<double> literal(t.samples.size(), 0.0);
    for (std::size_t n = 1; n <= 10; ++n) {
      const std::size_t col = *t.head_index(r.ranked_heads[n - 1]);
      for (std::size_t s = 0; s < literal.size(); ++s) {
        literal[s] = (static_cast<double>(n - 1) / n) * literal[s] + t.at(s, col) / n;
      }
      SelectionResult forced = r;
      forced.n_opt = n;
      auto scores = predict(t, forced);
      for (std::size_t s = 0; s < scores.size(); ++s) {
        CHECK(std::abs(scores[s] - naive.scores_per_n[n - 1][s]) <= 1e-12);
        CHECK(std::abs(scores[s] - literal[s]) <= 1e-12);
      }
      std::vector<int> y;
      for (const auto& l : t.labels) y.push_back(*l);
      CHECK(auroc(y, scores) == r.probe_auroc_trace[n - 1]);
    }
    // Deterministic, independent of thread count.
    auto again = select_heads(t, 10, 4);
    CHECK(again.ranked_heads == r.ranked_heads);
    CHECK(again.probe_auroc_trace == r.probe_auroc_trace);
  }
}

TEST_CASE("relabeling head columns does not change n_opt or best AUROC") {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    DivergenceTable t;
    for (std::uint32_t h = 0; h < 12; ++h) t.heads.push_back({h, 0});
    for (std::size_t s = 0; s < 30; ++s) {
      t.samples.push_back("s" + std::to_string(s));
      t.labels.emplace_back(static_cast<int>(s % 2));
      for (std::size_t h = 0; h < 12; ++h) t.values.push_back(u(rng));
    }
    auto base = select_heads(t, 10);

    std::vector<std::uint32_t> relabel(12);
    std::iota(relabel.begin(), relabel.end(), 0u);
    std::shuffle(relabel.begin(), relabel.end(), rng);
    DivergenceTable t2 = t;
    for (std::size_t h = 0; h < 12; ++h) t2.heads[h] = {relabel[h] + 100, 7};
    auto moved = select_heads(t2, 10);
    CHECK(moved.n_opt == base.n_opt);
    CHECK(moved.best_auroc == base.best_auroc);
  }
}

TEST_CASE("predict averages the selected heads") {
  auto t = make_table({{0, 0}, {0, 1}, {2, 5}}, {{0.2, 0.6, 0.9}, {0.4, 0.0, 0.1}}, {});
  SelectionResult sel;
  sel.ranked_heads = {{0, 1}, {0, 0}, {2, 5}};
  sel.deltas = {0.3, 0.2, 0.1};
  sel.n_opt = 1;
  auto one = predict(t, sel);
  CHECK(one == std::vector<double>{0.6, 0.0});
  sel.n_opt = 2;
  auto two = predict(t, sel);
  CHECK(two[0] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(two[1] == doctest::Approx(0.2).epsilon(1e-15));

  sel.ranked_heads[0] = {9, 9};
  CHECK_THROWS_AS(predict(t, sel), ValidationError);
}
