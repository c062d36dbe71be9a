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
#include <string>
#include <vector>

#include <json.hpp>

#include "evognn/common.hpp"

namespace evognn {

enum class AttentionKind { Const, Gcn, Gat, SymGat, Cos, Linear, GenLinear };
enum class Aggregator { Sum, Mean, Max };
enum class Activation {
  Sigmoid,
  Tanh,
  Relu,
  LeakyRelu,
  Elu,
  Softplus,
  Identity
};
enum class HeadCombine { Concat, Average };
enum class TaskKind { SingleLabel, MultiLabel };

inline const char* to_string(AttentionKind k) {
  switch (k) {
    case AttentionKind::Const: return "const";
    case AttentionKind::Gcn: return "gcn";
    case AttentionKind::Gat: return "gat";
    case AttentionKind::SymGat: return "sym_gat";
    case AttentionKind::Cos: return "cos";
    case AttentionKind::Linear: return "linear";
    case AttentionKind::GenLinear: return "gen_linear";
  }
  return "?";
}

inline const char* to_string(Aggregator a) {
  switch (a) {
    case Aggregator::Sum: return "sum";
    case Aggregator::Mean: return "mean";
    case Aggregator::Max: return "max";
  }
  return "?";
}

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Elu: return "elu";
    case Activation::Softplus: return "softplus";
    case Activation::Identity: return "identity";
  }
  return "?";
}

inline const char* to_string(HeadCombine c) {
  return c == HeadCombine::Concat ? "concat" : "average";
}

inline const char* to_string(TaskKind t) {
  return t == TaskKind::SingleLabel ? "single_label" : "multi_label";
}

namespace detail {

template <typename Enum>
Enum parse_enum(const std::string& text, const std::vector<Enum>& all,
                const char* what) {
  for (Enum e : all) {
    if (text == to_string(e)) return e;
  }
  throw FormatError(std::string(what) + ": unknown value '" + text + "'");
}

}  // namespace detail

inline const std::vector<AttentionKind>& all_attention_kinds() {
  static const std::vector<AttentionKind> kAll = {
      AttentionKind::Const,  AttentionKind::Gcn, AttentionKind::Gat,
      AttentionKind::SymGat, AttentionKind::Cos, AttentionKind::Linear,
      AttentionKind::GenLinear};
  return kAll;
}

inline const std::vector<Aggregator>& all_aggregators() {
  static const std::vector<Aggregator> kAll = {Aggregator::Sum, Aggregator::Mean,
                                               Aggregator::Max};
  return kAll;
}

inline const std::vector<Activation>& all_activations() {
  static const std::vector<Activation> kAll = {
      Activation::Sigmoid,  Activation::Tanh, Activation::Relu,
      Activation::LeakyRelu, Activation::Elu,  Activation::Softplus,
      Activation::Identity};
  return kAll;
}

inline AttentionKind parse_attention_kind(const std::string& s) {
  return detail::parse_enum(s, all_attention_kinds(), "attention_fn");
}
inline Aggregator parse_aggregator(const std::string& s) {
  return detail::parse_enum(s, all_aggregators(), "aggregator");
}
inline Activation parse_activation(const std::string& s) {
  return detail::parse_enum(s, all_activations(), "activation");
}
inline HeadCombine parse_head_combine(const std::string& s) {
  if (s == "concat") return HeadCombine::Concat;
  if (s == "average") return HeadCombine::Average;
  throw FormatError("head_combine: unknown value '" + s + "'");
}
inline TaskKind parse_task_kind(const std::string& s) {
  if (s == "single_label") return TaskKind::SingleLabel;
  if (s == "multi_label") return TaskKind::MultiLabel;
  throw FormatError("task: unknown value '" + s + "'");
}

/// One layer's six searchable states. skip_mask bit i means a connection
/// from layer i (0 = the network input) into this layer; the edge from the
/// immediately preceding layer is implicit and never encoded.
struct LayerGene {
  AttentionKind attention_fn = AttentionKind::Gcn;
  int heads = 1;
  int hidden_dim = 16;
  Aggregator aggregator = Aggregator::Sum;
  Activation activation = Activation::Relu;
  std::uint64_t skip_mask = 0;

  bool operator==(const LayerGene&) const = default;
};

struct ArchitectureGenome {
  std::vector<LayerGene> layers;
  HeadCombine head_combine = HeadCombine::Average;  // applies to the last layer
  int output_classes = 2;
  TaskKind task = TaskKind::SingleLabel;

  int depth() const { return static_cast<int>(layers.size()); }
  bool operator==(const ArchitectureGenome&) const = default;
};

/// Allowed value set per state. layer_add is a mutation-only option and
/// has no per-layer value, only an on/off switch.
struct GenomeSpace {
  std::vector<AttentionKind> attention_fns = all_attention_kinds();
  std::vector<int> heads = {1, 2, 4, 6, 8};
  std::vector<int> hidden_dims = {4, 8, 16, 32, 64, 128, 256};
  std::vector<Aggregator> aggregators = all_aggregators();
  std::vector<Activation> activations = all_activations();
  bool allow_layer_add = true;

  static GenomeSpace defaults() { return GenomeSpace{}; }
};

inline void check_space(const GenomeSpace& space) {
  if (space.attention_fns.empty() || space.heads.empty() ||
      space.hidden_dims.empty() || space.aggregators.empty() ||
      space.activations.empty()) {
    throw ConfigError("genome space: every state needs a non-empty value set");
  }
  for (int h : space.heads)
    if (h < 1) throw ConfigError("genome space: heads must be positive");
  for (int d : space.hidden_dims)
    if (d < 1) throw ConfigError("genome space: hidden_dim must be positive");
}

/// Upper bound (exclusive) for the skip mask of layer k (1-based).
inline std::uint64_t skip_mask_bound(int k) {
  if (k < 1) throw EncodingError("layer index must be >= 1");
  if (k > 64) throw EncodingError("layer index too large for a 64-bit mask");
  return k == 1 ? 1 : (std::uint64_t{1} << (k - 1));
}

/// Expands mask s of layer k into the connected source layer indices
/// {0,...,k-2}; 0 is the raw input. The implicit (k-1)->k edge is not part
/// of the result.
inline std::vector<int> skip_mask_decode(std::uint64_t s, int k) {
  if (s >= skip_mask_bound(k)) {
    throw EncodingError("skip mask " + std::to_string(s) +
                        " out of range for layer " + std::to_string(k));
  }
  std::vector<int> out;
  for (int i = 0; i <= k - 2; ++i) {
    if (s >> i & 1) out.push_back(i);
  }
  return out;
}

inline std::uint64_t skip_mask_encode(const std::vector<int>& connections,
                                      int k) {
  skip_mask_bound(k);  // validates k
  std::uint64_t s = 0;
  for (int i : connections) {
    if (i < 0 || i > k - 2) {
      throw EncodingError("connection index " + std::to_string(i) +
                          " invalid for layer " + std::to_string(k));
    }
    const std::uint64_t bit = std::uint64_t{1} << i;
    if (s & bit) {
      throw EncodingError("duplicate connection index " + std::to_string(i));
    }
    s |= bit;
  }
  return s;
}

/// Output width of layer j (0 = input features). Hidden layers concatenate
/// heads; the last layer follows the genome's head_combine.
inline int layer_output_width(const ArchitectureGenome& g, int j,
                              int feature_dim) {
  if (j == 0) return feature_dim;
  const LayerGene& gene = g.layers.at(static_cast<std::size_t>(j) - 1);
  const bool average_heads =
      j == g.depth() && g.head_combine == HeadCombine::Average;
  return average_heads ? gene.hidden_dim : gene.heads * gene.hidden_dim;
}

/// Input width of layer k: the implicit previous layer plus every source in
/// its skip mask ("sum of all the output dimensions of the connected layers").
inline int layer_input_dim(const ArchitectureGenome& g, int k,
                           int feature_dim) {
  if (k < 1 || k > g.depth()) {
    throw EncodingError("layer index " + std::to_string(k) + " out of range");
  }
  int dim = layer_output_width(g, k - 1, feature_dim);
  for (int i : skip_mask_decode(g.layers[static_cast<std::size_t>(k) - 1].skip_mask, k)) {
    dim += layer_output_width(g, i, feature_dim);
  }
  return dim;
}

/// Sources feeding layer k in ascending index order (mask sources plus the
/// implicit k-1).
inline std::vector<int> layer_input_sources(const ArchitectureGenome& g,
                                            int k) {
  std::vector<int> sources =
      skip_mask_decode(g.layers.at(static_cast<std::size_t>(k) - 1).skip_mask, k);
  sources.push_back(k - 1);
  std::sort(sources.begin(), sources.end());
  return sources;
}

/// Structural checks; violations are returned as data, an empty list means
/// the genome is well-formed.
inline std::vector<std::string> validate(const ArchitectureGenome& g,
                                         const GenomeSpace& space) {
  std::vector<std::string> violations;
  auto fail = [&](int layer, const std::string& msg) {
    violations.push_back("layer " + std::to_string(layer) + ": " + msg);
  };
  if (g.layers.empty()) violations.push_back("genome has no layers");
  if (g.output_classes < 1) violations.push_back("output_classes must be >= 1");
  for (int k = 1; k <= g.depth(); ++k) {
    const LayerGene& gene = g.layers[static_cast<std::size_t>(k) - 1];
    auto in = [](auto v, const auto& set) {
      return std::find(set.begin(), set.end(), v) != set.end();
    };
    if (!in(gene.attention_fn, space.attention_fns))
      fail(k, "attention_fn outside space");
    if (!in(gene.heads, space.heads)) fail(k, "heads value outside space");
    if (!in(gene.hidden_dim, space.hidden_dims))
      fail(k, "hidden_dim value outside space");
    if (!in(gene.aggregator, space.aggregators))
      fail(k, "aggregator outside space");
    if (!in(gene.activation, space.activations))
      fail(k, "activation outside space");
    if (k <= 64 && gene.skip_mask >= skip_mask_bound(k))
      fail(k, "mask >= 2^(k-1)");
    if (k > 64) fail(k, "depth beyond 64 not encodable");
  }
  return violations;
}

inline std::vector<std::string> validate(const ArchitectureGenome& g) {
  return validate(g, GenomeSpace::defaults());
}

/// Random two-layer genome, each state uniform over its set.
inline ArchitectureGenome new_initial_genome(Rng& rng, const GenomeSpace& space,
                                             int classes, TaskKind task) {
  check_space(space);
  if (classes < 1) throw ConfigError("output classes must be >= 1");
  ArchitectureGenome g;
  g.output_classes = classes;
  g.task = task;
  g.head_combine = HeadCombine::Average;
  for (int k = 1; k <= 2; ++k) {
    LayerGene gene;
    gene.attention_fn = rng.pick(space.attention_fns);
    gene.heads = rng.pick(space.heads);
    gene.hidden_dim = rng.pick(space.hidden_dims);
    gene.aggregator = rng.pick(space.aggregators);
    gene.activation = rng.pick(space.activations);
    gene.skip_mask = rng.uniform_index(skip_mask_bound(k));
    g.layers.push_back(gene);
  }
  return g;
}

// --- canonical serialization ------------------------------------------------

inline nlohmann::ordered_json genome_to_json(const ArchitectureGenome& g) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["task"] = to_string(g.task);
  j["output_classes"] = g.output_classes;
  j["head_combine"] = to_string(g.head_combine);
  auto& layers = j["layers"] = nlohmann::ordered_json::array();
  for (const LayerGene& gene : g.layers) {
    nlohmann::ordered_json lj;
    lj["attention_fn"] = to_string(gene.attention_fn);
    lj["heads"] = gene.heads;
    lj["hidden_dim"] = gene.hidden_dim;
    lj["aggregator"] = to_string(gene.aggregator);
    lj["activation"] = to_string(gene.activation);
    lj["skip_mask"] = gene.skip_mask;
    layers.push_back(std::move(lj));
  }
  return j;
}

/// Canonical bytes: fixed field order, compact JSON. Structurally equal
/// genomes serialize to identical strings, so this doubles as a hash key.
inline std::string canonical_serialize(const ArchitectureGenome& g) {
  return genome_to_json(g).dump();
}

inline ArchitectureGenome genome_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("genome: expected an object");
  auto need = [&](const char* key) -> const nlohmann::json& {
    auto it = j.find(key);
    if (it == j.end())
      throw FormatError(std::string("genome: missing field '") + key + "'");
    return *it;
  };
  if (need("version").get<int>() != 1) {
    throw FormatError("genome: unsupported version " +
                      need("version").dump());
  }
  ArchitectureGenome g;
  g.task = parse_task_kind(need("task").get<std::string>());
  g.output_classes = need("output_classes").get<int>();
  g.head_combine = parse_head_combine(need("head_combine").get<std::string>());
  const nlohmann::json& layers = need("layers");
  if (!layers.is_array() || layers.empty()) {
    throw FormatError("genome: 'layers' must be a non-empty array");
  }
  for (const auto& lj : layers) {
    LayerGene gene;
    auto lneed = [&](const char* key) -> const nlohmann::json& {
      auto it = lj.find(key);
      if (it == lj.end())
        throw FormatError(std::string("genome layer: missing field '") + key +
                          "'");
      return *it;
    };
    gene.attention_fn =
        parse_attention_kind(lneed("attention_fn").get<std::string>());
    gene.heads = lneed("heads").get<int>();
    gene.hidden_dim = lneed("hidden_dim").get<int>();
    gene.aggregator = parse_aggregator(lneed("aggregator").get<std::string>());
    gene.activation = parse_activation(lneed("activation").get<std::string>());
    gene.skip_mask = lneed("skip_mask").get<std::uint64_t>();
    g.layers.push_back(gene);
  }
  return g;
}

inline ArchitectureGenome canonical_parse(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("genome parse: ") + e.what());
  }
  return genome_from_json(j);
}

}  // namespace evognn
