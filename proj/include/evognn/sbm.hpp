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

#include <string>
#include <vector>

#include "evognn/dataset.hpp"

namespace evognn {

/// Stochastic block model with per-community Gaussian features; the fast,
/// controllable stand-in for citation-network data in tests and examples.
struct SbmParams {
  int communities = 4;
  int nodes_per_community = 100;
  double p_in = 0.1;
  double p_out = 0.01;
  int feature_dim = 16;
  double feature_signal = 0.6;  // separation of community means
  double train_fraction = 0.1;
  double val_fraction = 0.2;
  double test_fraction = 0.7;
  TaskKind task = TaskKind::SingleLabel;
  double multi_label_overlap = 0.3;  // chance of a second community label
  std::uint64_t seed = 1;
};

inline void check_sbm(const SbmParams& p) {
  if (p.communities < 1 || p.nodes_per_community < 1) {
    throw ConfigError("sbm: need at least one community and one node");
  }
  if (!(p.p_out >= 0.0 && p.p_out < p.p_in && p.p_in <= 1.0)) {
    throw ConfigError("sbm: require 0 <= p_out < p_in <= 1");
  }
  if (p.feature_dim < 1) throw ConfigError("sbm: feature_dim must be >= 1");
  if (p.train_fraction < 0 || p.val_fraction < 0 || p.test_fraction < 0 ||
      p.train_fraction + p.val_fraction + p.test_fraction > 1.0 + 1e-12) {
    throw ConfigError("sbm: split fractions must be >= 0 and sum to <= 1");
  }
}

/// Deterministic under the seed: every node pair draws one Bernoulli, every
/// feature one Gaussian, masks are stratified per community.
inline GraphDataset generate_sbm(const SbmParams& p) {
  check_sbm(p);
  Rng rng(p.seed);
  const int n = p.communities * p.nodes_per_community;

  std::vector<int> community(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) community[static_cast<std::size_t>(i)] = i / p.nodes_per_community;

  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double prob = community[static_cast<std::size_t>(i)] ==
                                  community[static_cast<std::size_t>(j)]
                              ? p.p_in
                              : p.p_out;
      if (rng.bernoulli(prob)) edges.emplace_back(i, j);
    }
  }

  GraphDataset d;
  d.name = "sbm-c" + std::to_string(p.communities) + "x" +
           std::to_string(p.nodes_per_community);
  d.task = p.task;
  d.classes = p.communities;
  d.raw_edge_count = static_cast<int>(edges.size());
  d.graph = Graph::from_undirected(n, edges);

  d.features.resize(n, p.feature_dim);
  for (int i = 0; i < n; ++i) {
    const int c = community[static_cast<std::size_t>(i)];
    const int axis = c % p.feature_dim;
    for (int f = 0; f < p.feature_dim; ++f) {
      const double mean = f == axis ? p.feature_signal : 0.0;
      d.features(i, f) = static_cast<float>(rng.normal(mean, 1.0));
    }
  }

  if (p.task == TaskKind::SingleLabel) {
    d.labels = community;
  } else {
    d.label_matrix = Mat::Zero(n, p.communities);
    for (int i = 0; i < n; ++i) {
      const int c = community[static_cast<std::size_t>(i)];
      d.label_matrix(i, c) = 1.0;
      if (p.communities > 1 && rng.bernoulli(p.multi_label_overlap)) {
        d.label_matrix(i, (c + 1) % p.communities) = 1.0;
      }
    }
  }

  d.train_mask.assign(static_cast<std::size_t>(n), 0);
  d.val_mask.assign(static_cast<std::size_t>(n), 0);
  d.test_mask.assign(static_cast<std::size_t>(n), 0);
  for (int c = 0; c < p.communities; ++c) {
    std::vector<int> members;
    for (int i = 0; i < n; ++i) {
      if (community[static_cast<std::size_t>(i)] == c) members.push_back(i);
    }
    auto order = rng.sample_without_replacement(members.size(), members.size());
    const auto size = static_cast<double>(members.size());
    std::size_t n_train = static_cast<std::size_t>(std::llround(p.train_fraction * size));
    std::size_t n_val = static_cast<std::size_t>(std::llround(p.val_fraction * size));
    std::size_t n_test = static_cast<std::size_t>(std::llround(p.test_fraction * size));
    n_train = std::min(n_train, members.size());
    n_val = std::min(n_val, members.size() - n_train);
    n_test = std::min(n_test, members.size() - n_train - n_val);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n_train; ++i)
      d.train_mask[static_cast<std::size_t>(members[order[pos++]])] = 1;
    for (std::size_t i = 0; i < n_val; ++i)
      d.val_mask[static_cast<std::size_t>(members[order[pos++]])] = 1;
    for (std::size_t i = 0; i < n_test; ++i)
      d.test_mask[static_cast<std::size_t>(members[order[pos++]])] = 1;
  }
  d.rebuild_row_lists();

  if ((p.train_fraction > 0 && d.train_rows.empty()) ||
      (p.val_fraction > 0 && d.val_rows.empty()) ||
      (p.test_fraction > 0 && d.test_rows.empty())) {
    throw ConfigError("sbm: split fractions round to an empty split");
  }
  return d;
}

}  // namespace evognn
