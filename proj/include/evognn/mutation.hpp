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

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "evognn/genome.hpp"

namespace evognn {

enum class MutationKind {
  AttentionFn,
  Heads,
  HiddenDim,
  Aggregator,
  Activation,
  SkipConnection,
  LayerAdd
};

inline const char* to_string(MutationKind k) {
  switch (k) {
    case MutationKind::AttentionFn: return "attention_fn";
    case MutationKind::Heads: return "heads";
    case MutationKind::HiddenDim: return "hidden_dim";
    case MutationKind::Aggregator: return "aggregator";
    case MutationKind::Activation: return "activation";
    case MutationKind::SkipConnection: return "skip_connection";
    case MutationKind::LayerAdd: return "layer_add";
  }
  return "?";
}

inline MutationKind parse_mutation_kind(const std::string& s) {
  for (MutationKind k :
       {MutationKind::AttentionFn, MutationKind::Heads, MutationKind::HiddenDim,
        MutationKind::Aggregator, MutationKind::Activation,
        MutationKind::SkipConnection, MutationKind::LayerAdd}) {
    if (s == to_string(k)) return k;
  }
  throw FormatError("mutation kind: unknown value '" + s + "'");
}

/// What a single mutation step changed. Values are kept in their canonical
/// text form so the diff can be streamed into the history log as-is.
struct MutationDiff {
  MutationKind kind = MutationKind::AttentionFn;
  int layer = 1;  // 1-based target layer
  std::string old_value;
  std::string new_value;

  bool operator==(const MutationDiff&) const = default;
};

inline nlohmann::ordered_json diff_to_json(const MutationDiff& d) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(d.kind);
  j["layer"] = d.layer;
  j["old"] = d.old_value;
  j["new"] = d.new_value;
  return j;
}

inline MutationDiff diff_from_json(const nlohmann::json& j) {
  MutationDiff d;
  d.kind = parse_mutation_kind(j.at("kind").get<std::string>());
  d.layer = j.at("layer").get<int>();
  d.old_value = j.at("old").get<std::string>();
  d.new_value = j.at("new").get<std::string>();
  return d;
}

/// Duplicates layer idx and inserts the copy right after it. Downstream skip
/// masks are re-indexed so they keep pointing at the same source layers:
/// source indices <= idx are unchanged, indices >= idx+1 shift up by one, and
/// the copy's own bit stays 0 everywhere downstream. The copy keeps the
/// original's mask (its bound at the new position is strictly larger).
inline ArchitectureGenome apply_layer_add(const ArchitectureGenome& g, int idx,
                                          int max_layers) {
  if (idx < 1 || idx > g.depth()) {
    throw EncodingError("layer_add: index " + std::to_string(idx) +
                        " out of range");
  }
  if (g.depth() >= max_layers) {
    throw CapacityError("layer_add: genome already has " +
                        std::to_string(g.depth()) + " of max " +
                        std::to_string(max_layers) + " layers");
  }
  ArchitectureGenome out = g;
  out.layers.insert(out.layers.begin() + idx, g.layers[static_cast<std::size_t>(idx) - 1]);
  for (int j = idx + 2; j <= out.depth(); ++j) {
    std::uint64_t old_mask = out.layers[static_cast<std::size_t>(j) - 1].skip_mask;
    std::uint64_t new_mask = 0;
    for (int i = 0; i < 63; ++i) {
      if (old_mask >> i & 1) {
        new_mask |= std::uint64_t{1} << (i >= idx + 1 ? i + 1 : i);
      }
    }
    out.layers[static_cast<std::size_t>(j) - 1].skip_mask = new_mask;
  }
  return out;
}

namespace detail {

template <typename T>
bool has_alternative(const std::vector<T>& set, const T& current) {
  for (const T& v : set) {
    if (!(v == current)) return true;
  }
  return false;
}

template <typename T>
T resample_excluding(Rng& rng, const std::vector<T>& set, const T& current) {
  std::vector<T> rest;
  for (const T& v : set) {
    if (!(v == current)) rest.push_back(v);
  }
  return rng.pick(rest);
}

inline std::vector<MutationKind> eligible_kinds(const ArchitectureGenome& g,
                                                int layer,
                                                const GenomeSpace& space,
                                                int max_layers) {
  const LayerGene& gene = g.layers[static_cast<std::size_t>(layer) - 1];
  std::vector<MutationKind> kinds;
  if (has_alternative(space.attention_fns, gene.attention_fn))
    kinds.push_back(MutationKind::AttentionFn);
  if (has_alternative(space.heads, gene.heads))
    kinds.push_back(MutationKind::Heads);
  if (has_alternative(space.hidden_dims, gene.hidden_dim))
    kinds.push_back(MutationKind::HiddenDim);
  if (has_alternative(space.aggregators, gene.aggregator))
    kinds.push_back(MutationKind::Aggregator);
  if (has_alternative(space.activations, gene.activation))
    kinds.push_back(MutationKind::Activation);
  // the first layer's mask is pinned to 0
  if (layer >= 2 && skip_mask_bound(layer) > 1)
    kinds.push_back(MutationKind::SkipConnection);
  if (space.allow_layer_add && g.depth() < max_layers)
    kinds.push_back(MutationKind::LayerAdd);
  return kinds;
}

}  // namespace detail

/// One uniformly drawn single-state change: pick a layer, pick a mutable
/// state of that layer (layer_add counts as one more option while depth is
/// below the cap), resample the value excluding the current one.
inline std::pair<ArchitectureGenome, MutationDiff> mutate(
    const ArchitectureGenome& g, Rng& rng, const GenomeSpace& space,
    int max_layers) {
  check_space(space);
  if (g.layers.empty()) throw MutationError("mutate: empty genome");

  int layer = 1 + static_cast<int>(rng.uniform_index(
                      static_cast<std::uint64_t>(g.depth())));
  std::vector<MutationKind> kinds =
      detail::eligible_kinds(g, layer, space, max_layers);
  if (kinds.empty()) {
    // the drawn layer has nothing mutable; fall back to layers that do
    std::vector<int> candidates;
    for (int l = 1; l <= g.depth(); ++l) {
      if (!detail::eligible_kinds(g, l, space, max_layers).empty())
        candidates.push_back(l);
    }
    if (candidates.empty())
      throw MutationError("mutate: no mutable state in genome");
    layer = candidates[rng.uniform_index(candidates.size())];
    kinds = detail::eligible_kinds(g, layer, space, max_layers);
  }
  const MutationKind kind = kinds[rng.uniform_index(kinds.size())];

  ArchitectureGenome out = g;
  LayerGene& gene = out.layers[static_cast<std::size_t>(layer) - 1];
  MutationDiff diff;
  diff.kind = kind;
  diff.layer = layer;
  switch (kind) {
    case MutationKind::AttentionFn:
      diff.old_value = to_string(gene.attention_fn);
      gene.attention_fn =
          detail::resample_excluding(rng, space.attention_fns, gene.attention_fn);
      diff.new_value = to_string(gene.attention_fn);
      break;
    case MutationKind::Heads:
      diff.old_value = std::to_string(gene.heads);
      gene.heads = detail::resample_excluding(rng, space.heads, gene.heads);
      diff.new_value = std::to_string(gene.heads);
      break;
    case MutationKind::HiddenDim:
      diff.old_value = std::to_string(gene.hidden_dim);
      gene.hidden_dim =
          detail::resample_excluding(rng, space.hidden_dims, gene.hidden_dim);
      diff.new_value = std::to_string(gene.hidden_dim);
      break;
    case MutationKind::Aggregator:
      diff.old_value = to_string(gene.aggregator);
      gene.aggregator =
          detail::resample_excluding(rng, space.aggregators, gene.aggregator);
      diff.new_value = to_string(gene.aggregator);
      break;
    case MutationKind::Activation:
      diff.old_value = to_string(gene.activation);
      gene.activation =
          detail::resample_excluding(rng, space.activations, gene.activation);
      diff.new_value = to_string(gene.activation);
      break;
    case MutationKind::SkipConnection: {
      const std::uint64_t bound = skip_mask_bound(layer);
      diff.old_value = std::to_string(gene.skip_mask);
      std::uint64_t draw = rng.uniform_index(bound - 1);
      if (draw >= gene.skip_mask) ++draw;  // skip over the current value
      gene.skip_mask = draw;
      diff.new_value = std::to_string(gene.skip_mask);
      break;
    }
    case MutationKind::LayerAdd:
      out = apply_layer_add(g, layer, max_layers);
      diff.old_value = "";
      diff.new_value = "";
      break;
  }
  return {std::move(out), std::move(diff)};
}

/// Test oracle for the "only change one state" contract: recovers the unique
/// single-state difference between two genomes, or nothing if they differ in
/// zero states or more than one (a layer_add with its re-indexing counts as
/// one step).
inline std::optional<MutationDiff> mutation_diff(const ArchitectureGenome& a,
                                                 const ArchitectureGenome& b) {
  if (a.head_combine != b.head_combine || a.output_classes != b.output_classes ||
      a.task != b.task) {
    return std::nullopt;
  }
  if (a.depth() == b.depth()) {
    std::vector<MutationDiff> diffs;
    for (int k = 1; k <= a.depth(); ++k) {
      const LayerGene& la = a.layers[static_cast<std::size_t>(k) - 1];
      const LayerGene& lb = b.layers[static_cast<std::size_t>(k) - 1];
      if (la.attention_fn != lb.attention_fn)
        diffs.push_back({MutationKind::AttentionFn, k, to_string(la.attention_fn),
                         to_string(lb.attention_fn)});
      if (la.heads != lb.heads)
        diffs.push_back({MutationKind::Heads, k, std::to_string(la.heads),
                         std::to_string(lb.heads)});
      if (la.hidden_dim != lb.hidden_dim)
        diffs.push_back({MutationKind::HiddenDim, k,
                         std::to_string(la.hidden_dim),
                         std::to_string(lb.hidden_dim)});
      if (la.aggregator != lb.aggregator)
        diffs.push_back({MutationKind::Aggregator, k, to_string(la.aggregator),
                         to_string(lb.aggregator)});
      if (la.activation != lb.activation)
        diffs.push_back({MutationKind::Activation, k, to_string(la.activation),
                         to_string(lb.activation)});
      if (la.skip_mask != lb.skip_mask)
        diffs.push_back({MutationKind::SkipConnection, k,
                         std::to_string(la.skip_mask),
                         std::to_string(lb.skip_mask)});
    }
    if (diffs.size() == 1) return diffs.front();
    return std::nullopt;
  }
  if (b.depth() == a.depth() + 1) {
    for (int idx = 1; idx <= a.depth(); ++idx) {
      if (apply_layer_add(a, idx, b.depth()) == b) {
        return MutationDiff{MutationKind::LayerAdd, idx, "", ""};
      }
    }
  }
  return std::nullopt;
}

}  // namespace evognn
