// Copyright 2026 The toha Authors
// SPDX-License-Identifier: Apache-2.0

// Attention graphs and their zero-dimensional topology.
//
// An attention map over n tokens becomes a complete graph whose edge {i, j}
// (i > j) has length 1 - w[i][j]. Tokens [0, prompt_len) form the prompt
// block P, the rest the response block R. The divergence of R from P is the
// total 0-dim barcode length of the graph with all P-P edges set to zero,
// which is the length of the minimal spanning forest attaching every R
// vertex to P.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "toha/attn_store.hpp"

namespace toha {

/// Symmetric n x n matrix with zero diagonal, stored as a packed lower
/// triangle (diagonal included).
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(std::size_t n) : n_(n), packed_(packed_triangle_size(n), 0.0) {}

  std::size_t size() const { return n_; }

  double operator()(std::size_t i, std::size_t j) const {
    return i >= j ? packed_[index(i, j)] : packed_[index(j, i)];
  }
  void set(std::size_t i, std::size_t j, double v) {
    if (i == j) return;
    packed_[i >= j ? index(i, j) : index(j, i)] = v;
  }

  /// Row i, columns 0..i.
  std::span<const double> lower_row(std::size_t i) const {
    return std::span<const double>(packed_).subspan(index(i, 0), i + 1);
  }

 private:
  static std::size_t index(std::size_t i, std::size_t j) { return i * (i + 1) / 2 + j; }

  std::size_t n_ = 0;
  std::vector<double> packed_;
};

class DistanceGraph {
 public:
  /// Throws ValidationError unless 0 < prompt_len < n and every entry is a
  /// finite value in [0,1].
  DistanceGraph(SymmetricMatrix dist, std::size_t prompt_len);

  std::size_t size() const { return dist_.size(); }
  std::size_t prompt_len() const { return prompt_len_; }
  std::size_t response_len() const { return dist_.size() - prompt_len_; }
  double operator()(std::size_t i, std::size_t j) const { return dist_(i, j); }
  const SymmetricMatrix& matrix() const { return dist_; }

 private:
  SymmetricMatrix dist_;
  std::size_t prompt_len_;
};

struct Edge {
  std::size_t u = 0;  // u < v
  std::size_t v = 0;
  double weight = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct MsfResult {
  double total_length = 0.0;
  /// Sorted ascending by (weight, u, v); total_length is summed in this order.
  std::vector<Edge> edges;
};

struct Interval {
  double birth = 0.0;
  double death = 0.0;

  double length() const { return death - birth; }
};

struct Barcode0 {
  std::vector<Interval> intervals;

  double total_length() const;
};

/// dist[i][j] = 1 - w[max(i,j)][min(i,j)].
DistanceGraph to_distance_graph(const TriangularView& map, std::size_t prompt_len);

/// Graphs with at least this many vertices take the Prim path in mtop_div().
inline constexpr std::size_t kPrimThreshold = 512;

/// Minimal spanning forest attaching R to the pre-merged P block.
MsfResult mtop_div(const DistanceGraph& g);

/// Kruskal over P-R and R-R edges with P pre-merged in a disjoint set. Ties
/// are broken by (weight, min endpoint, max endpoint).
MsfResult mtop_div_kruskal(const DistanceGraph& g);

/// Prim over the implicit complete graph with P contracted to one root,
/// O(n^2) time and O(n) extra memory.
MsfResult mtop_div_prim(const DistanceGraph& g);

/// Intervals [0, w_e], one per forest edge, in forest edge order.
Barcode0 barcode0(const DistanceGraph& g);

/// MST length over `vertices` (Prim, O(k^2)). Zero for a single vertex;
/// throws ValidationError for an empty subset.
double mst_length(const SymmetricMatrix& dist, std::span<const std::size_t> vertices);
double mst_length_full(const DistanceGraph& g);
double mst_length_prompt(const DistanceGraph& g);

/// mtop_div(g).total_length / |R|, in [0,1].
double normalized_divergence(const DistanceGraph& g);

}  // namespace toha
