// Copyright 2026 The evognn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "evognn/common.hpp"

namespace evognn {

using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Message-passing structure shared by every forward pass on a graph:
/// the symmetrized edge set plus one self-loop per node, sorted by
/// destination so per-destination segments are contiguous.
struct EdgePlan {
  int n = 0;
  int m = 0;                      // directed edges incl. self-loops
  std::vector<int> src;
  std::vector<int> dst;
  std::vector<int> rev;           // index of the reversed edge
  std::vector<double> gcn_w;      // 1/sqrt(deg~_src * deg~_dst)
  std::vector<double> unit_w;     // all ones (const attention)
  std::vector<int> seg_begin;     // n+1 offsets into src/dst by destination
  std::vector<double> inv_count;  // 1 / segment size per destination
};

/// Undirected graph stored as a deduplicated symmetric directed edge list.
/// Instances are immutable after construction; the propagation plan and the
/// renormalized adjacency are built eagerly so sharing across threads is
/// read-only.
class Graph {
 public:
  Graph() = default;

  /// Builds from an undirected edge list. Both directions are stored, input
  /// duplicates and self-loops are dropped (self-loops reappear exactly once
  /// during normalization).
  static Graph from_undirected(int n,
                               const std::vector<std::pair<int, int>>& edges) {
    if (n < 1) throw ConfigError("graph: need at least one node");
    Graph g;
    g.n_ = n;
    std::vector<std::pair<int, int>> dir;
    dir.reserve(edges.size() * 2);
    for (auto [u, v] : edges) {
      if (u < 0 || v < 0 || u >= n || v >= n) {
        throw ConfigError("graph: edge endpoint out of range: (" +
                          std::to_string(u) + ", " + std::to_string(v) + ")");
      }
      if (u == v) continue;
      dir.emplace_back(u, v);
      dir.emplace_back(v, u);
    }
    std::sort(dir.begin(), dir.end());
    dir.erase(std::unique(dir.begin(), dir.end()), dir.end());
    g.edges_ = std::move(dir);
    g.build_plan();
    g.build_adjacency();
    return g;
  }

  int node_count() const { return n_; }

  /// Symmetrized directed edges, no self-loops.
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }

  /// Unique undirected edge count.
  int undirected_edge_count() const { return static_cast<int>(edges_.size() / 2); }

  const EdgePlan& plan() const { return plan_; }

  /// D~^(-1/2) (A + I) D~^(-1/2) with D~ the degree matrix of A + I.
  const SpMat& normalized_adjacency() const { return adjacency_; }

 private:
  void build_plan() {
    EdgePlan& p = plan_;
    p.n = n_;
    p.m = static_cast<int>(edges_.size()) + n_;
    p.src.reserve(p.m);
    p.dst.reserve(p.m);

    // degree of A + I
    std::vector<int> degree(static_cast<std::size_t>(n_), 1);
    for (auto [u, v] : edges_) ++degree[static_cast<std::size_t>(v)];

    // edges_ is sorted by (src, dst); emit sorted by (dst, src) instead,
    // with the self-loop taking its place in the source order
    std::vector<std::pair<int, int>> by_dst;
    by_dst.reserve(static_cast<std::size_t>(p.m));
    for (auto [u, v] : edges_) by_dst.emplace_back(v, u);
    for (int i = 0; i < n_; ++i) by_dst.emplace_back(i, i);
    std::sort(by_dst.begin(), by_dst.end());
    for (auto [d, s] : by_dst) {
      p.dst.push_back(d);
      p.src.push_back(s);
    }

    p.seg_begin.assign(static_cast<std::size_t>(n_) + 1, 0);
    for (int e = 0; e < p.m; ++e) ++p.seg_begin[static_cast<std::size_t>(p.dst[e]) + 1];
    for (int i = 0; i < n_; ++i) p.seg_begin[static_cast<std::size_t>(i) + 1] += p.seg_begin[static_cast<std::size_t>(i)];

    p.inv_count.resize(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) {
      p.inv_count[static_cast<std::size_t>(i)] =
          1.0 / static_cast<double>(p.seg_begin[static_cast<std::size_t>(i) + 1] -
                                    p.seg_begin[static_cast<std::size_t>(i)]);
    }

    p.unit_w.assign(static_cast<std::size_t>(p.m), 1.0);
    p.gcn_w.resize(static_cast<std::size_t>(p.m));
    for (int e = 0; e < p.m; ++e) {
      p.gcn_w[static_cast<std::size_t>(e)] =
          1.0 / std::sqrt(static_cast<double>(degree[static_cast<std::size_t>(p.src[e])]) *
                          static_cast<double>(degree[static_cast<std::size_t>(p.dst[e])]));
    }

    // reverse-edge lookup via binary search over the (dst, src) order
    p.rev.resize(static_cast<std::size_t>(p.m));
    auto find_edge = [&](int d, int s) {
      int lo = p.seg_begin[static_cast<std::size_t>(d)];
      int hi = p.seg_begin[static_cast<std::size_t>(d) + 1];
      auto begin = p.src.begin() + lo;
      auto end = p.src.begin() + hi;
      auto it = std::lower_bound(begin, end, s);
      return static_cast<int>(it - p.src.begin());
    };
    for (int e = 0; e < p.m; ++e) {
      p.rev[static_cast<std::size_t>(e)] = find_edge(p.src[e], p.dst[e]);
    }
  }

  void build_adjacency() {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(plan_.m));
    for (int e = 0; e < plan_.m; ++e) {
      trips.emplace_back(plan_.dst[e], plan_.src[e], plan_.gcn_w[static_cast<std::size_t>(e)]);
    }
    adjacency_.resize(n_, n_);
    adjacency_.setFromTriplets(trips.begin(), trips.end());
    adjacency_.makeCompressed();
  }

  int n_ = 0;
  std::vector<std::pair<int, int>> edges_;
  EdgePlan plan_;
  SpMat adjacency_;
};

inline SpMat normalized_adjacency(const Graph& g) {
  return g.normalized_adjacency();
}

}  // namespace evognn
