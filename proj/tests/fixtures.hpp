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

#include <vector>

#include "evognn/genome.hpp"

namespace evognn::testing {

/// Uniform random genome of the given depth (masks uniform within their
/// per-layer bound). Initial-population genomes come from new_initial_genome;
/// this one exists so tests can cover deeper architectures directly.
inline ArchitectureGenome random_genome(Rng& rng, const GenomeSpace& space,
                                        int depth, int classes, TaskKind task) {
  ArchitectureGenome g;
  g.output_classes = classes;
  g.task = task;
  for (int k = 1; k <= depth; ++k) {
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

/// Small space used where the full default space would make tests slow.
inline GenomeSpace tiny_space() {
  GenomeSpace s;
  s.heads = {1, 2};
  s.hidden_dims = {4, 8};
  return s;
}

}  // namespace evognn::testing
