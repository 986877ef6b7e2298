// Copyright 2026 The toha Authors
// SPDX-License-Identifier: Apache-2.0

#include "toha/graph_topology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "toha/disjoint_set.hpp"
#include "toha/error.hpp"

namespace toha {

namespace {

bool edge_less(const Edge& a, const Edge& b) {
  if (a.weight != b.weight) return a.weight < b.weight;
  if (a.u != b.u) return a.u < b.u;
  return a.v < b.v;
}

Edge make_edge(std::size_t a, std::size_t b, double w) {
  return a < b ? Edge{a, b, w} : Edge{b, a, w};
}

// Both forest algorithms emit the same weight multiset; summing the sorted
// list makes their totals bit-identical.
MsfResult finish(std::vector<Edge> edges) {
  std::sort(edges.begin(), edges.end(), edge_less);
  MsfResult r;
  for (const auto& e : edges) r.total_length += e.weight;
  r.edges = std::move(edges);
  return r;
}

double sorted_sum(std::vector<double>& weights) {
  std::sort(weights.begin(), weights.end());
  double total = 0.0;
  for (double w : weights) total += w;
  return total;
}

}  // namespace

DistanceGraph::DistanceGraph(SymmetricMatrix dist, std::size_t prompt_len)
    : dist_(std::move(dist)), prompt_len_(prompt_len) {
  const std::size_t n = dist_.size();
  if (prompt_len_ == 0 || prompt_len_ >= n) {
    throw ValidationError("distance graph needs 0 < prompt_len < n, got prompt_len=" + std::to_string(prompt_len_) +
                          " n=" + std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (double d : dist_.lower_row(i)) {
      if (!(d >= 0.0 && d <= 1.0)) throw ValidationError("distance outside [0,1] in row " + std::to_string(i));
    }
  }
}

double Barcode0::total_length() const {
  double total = 0.0;
  for (const auto& iv : intervals) total += iv.length();
  return total;
}

DistanceGraph to_distance_graph(const TriangularView& map, std::size_t prompt_len) {
  const std::size_t n = map.size();
  SymmetricMatrix dist(n);
  for (std::size_t i = 1; i < n; ++i) {
    auto row = map.row(i);
    for (std::size_t j = 0; j < i; ++j) {
      double w = row[j];
      if (!(w >= 0.0 && w <= 1.0)) {
        throw ValidationError("attention weight outside [0,1] at (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
      }
      dist.set(i, j, 1.0 - w);
    }
  }
  return DistanceGraph(std::move(dist), prompt_len);
}

MsfResult mtop_div(const DistanceGraph& g) {
  return g.size() >= kPrimThreshold ? mtop_div_prim(g) : mtop_div_kruskal(g);
}

MsfResult mtop_div_kruskal(const DistanceGraph& g) {
  const std::size_t n = g.size();
  const std::size_t p = g.prompt_len();
  const std::size_t r = g.response_len();

  // With P merged, every P-R edge at a response vertex is parallel to the
  // others; only the first in (weight, p) order can ever be accepted.
  std::vector<Edge> candidates;
  candidates.reserve(r + r * (r - 1) / 2);
  for (std::size_t v = p; v < n; ++v) {
    auto row = g.matrix().lower_row(v);
    std::size_t best = 0;
    for (std::size_t u = 1; u < p; ++u) {
      if (row[u] < row[best]) best = u;
    }
    candidates.push_back({best, v, row[best]});
    for (std::size_t u = p; u < v; ++u) candidates.push_back({u, v, row[u]});
  }
  std::sort(candidates.begin(), candidates.end(), edge_less);

  DisjointSet ds(n);
  ds.premerge(p);
  std::vector<Edge> accepted;
  accepted.reserve(r);
  for (const auto& e : candidates) {
    if (ds.unite(e.u, e.v)) {
      accepted.push_back(e);
      if (ds.components() == 1) break;
    }
  }
  return finish(std::move(accepted));
}

MsfResult mtop_div_prim(const DistanceGraph& g) {
  const std::size_t p = g.prompt_len();
  const std::size_t r = g.response_len();
  const auto& dist = g.matrix();

  // Index k in these arrays is response vertex p + k.
  std::vector<double> key(r);
  std::vector<std::size_t> parent(r);
  std::vector<char> done(r, 0);
  for (std::size_t k = 0; k < r; ++k) {
    auto row = dist.lower_row(p + k);
    std::size_t best = 0;
    for (std::size_t u = 1; u < p; ++u) {
      if (row[u] < row[best]) best = u;
    }
    key[k] = row[best];
    parent[k] = best;
  }

  std::vector<Edge> accepted;
  accepted.reserve(r);
  for (std::size_t step = 0; step < r; ++step) {
    std::size_t pick = r;
    double pick_key = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < r; ++k) {
      if (!done[k] && key[k] < pick_key) {
        pick = k;
        pick_key = key[k];
      }
    }
    done[pick] = 1;
    const std::size_t v = p + pick;
    accepted.push_back(make_edge(parent[pick], v, pick_key));
    for (std::size_t k = 0; k < r; ++k) {
      if (done[k]) continue;
      double d = dist(v, p + k);
      if (d < key[k]) {
        key[k] = d;
        parent[k] = v;
      }
    }
  }
  return finish(std::move(accepted));
}

Barcode0 barcode0(const DistanceGraph& g) {
  MsfResult msf = mtop_div(g);
  Barcode0 bc;
  bc.intervals.reserve(msf.edges.size());
  for (const auto& e : msf.edges) bc.intervals.push_back({0.0, e.weight});
  return bc;
}

double mst_length(const SymmetricMatrix& dist, std::span<const std::size_t> vertices) {
  const std::size_t k = vertices.size();
  if (k == 0) throw ValidationError("mst_length over an empty vertex subset");
  if (k == 1) return 0.0;

  std::vector<double> key(k, std::numeric_limits<double>::infinity());
  std::vector<char> done(k, 0);
  std::vector<double> chosen;
  chosen.reserve(k - 1);
  done[0] = 1;
  std::size_t last = 0;
  for (std::size_t step = 1; step < k; ++step) {
    std::size_t pick = k;
    double pick_key = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
      if (done[i]) continue;
      double d = dist(vertices[last], vertices[i]);
      if (d < key[i]) key[i] = d;
      if (key[i] < pick_key || pick == k) {
        pick = i;
        pick_key = key[i];
      }
    }
    done[pick] = 1;
    chosen.push_back(pick_key);
    last = pick;
  }
  return sorted_sum(chosen);
}

double mst_length_full(const DistanceGraph& g) {
  std::vector<std::size_t> all(g.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return mst_length(g.matrix(), all);
}

double mst_length_prompt(const DistanceGraph& g) {
  std::vector<std::size_t> prompt(g.prompt_len());
  for (std::size_t i = 0; i < prompt.size(); ++i) prompt[i] = i;
  return mst_length(g.matrix(), prompt);
}

double normalized_divergence(const DistanceGraph& g) {
  return mtop_div(g).total_length / static_cast<double>(g.response_len());
}

}  // namespace toha
