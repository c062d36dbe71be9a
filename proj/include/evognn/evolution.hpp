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

#include <atomic>
#include <chrono>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include <json.hpp>

#include "evognn/genome.hpp"
#include "evognn/mutation.hpp"

namespace evognn {

/// What the evaluator reports back for one candidate. `details` is an opaque
/// blob the harness forwards into the history log (hyperparameters, epochs,
/// timing); stub evaluators leave it empty.
struct EvalOutcome {
  double fitness = kNegInf;  // validation metric, higher is better
  double val_loss = std::numeric_limits<double>::infinity();
  bool failed = false;
  std::string fail_reason;
  nlohmann::ordered_json details;
};

using Evaluator =
    std::function<EvalOutcome(const ArchitectureGenome&, std::uint64_t seed)>;

struct CandidateRecord {
  ArchitectureGenome genome;
  double fitness = kNegInf;
  double val_loss = std::numeric_limits<double>::infinity();
  std::uint64_t birth_index = 0;  // doubles as the history/eval index
  std::optional<MutationDiff> parent_diff;
  std::uint64_t seed = 0;  // seed the evaluator received
  double wall_seconds = 0.0;
  EvalOutcome details;
};

/// Fixed-capacity ring ordered by birth. Insertions carry strictly
/// increasing birth indices so the oldest member is always at the front.
class Population {
 public:
  explicit Population(std::size_t capacity) : capacity_(capacity) {
    if (capacity < 2) throw ConfigError("population: capacity must be >= 2");
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return members_.size(); }
  bool full() const { return members_.size() == capacity_; }
  const std::deque<CandidateRecord>& members() const { return members_; }

  void insert(CandidateRecord record) {
    if (full()) throw ConfigError("population: insert into a full population");
    if (!members_.empty() && record.birth_index <= members_.back().birth_index) {
      throw ConfigError("population: birth indices must increase");
    }
    members_.push_back(std::move(record));
  }

  CandidateRecord evict_oldest() {
    if (members_.empty()) throw ConfigError("population: evict from empty");
    CandidateRecord oldest = std::move(members_.front());
    members_.pop_front();
    return oldest;
  }

 private:
  std::size_t capacity_;
  std::deque<CandidateRecord> members_;
};

/// Tournament selection: S members drawn without replacement, highest
/// fitness wins, fitness ties go to the youngest.
inline const CandidateRecord& select_parent(const Population& population,
                                            int sample_size, Rng& rng) {
  if (sample_size < 1 ||
      static_cast<std::size_t>(sample_size) > population.size()) {
    throw ConfigError("select_parent: sample size must be in [1, population]");
  }
  auto drawn = rng.sample_without_replacement(
      population.size(), static_cast<std::size_t>(sample_size));
  const CandidateRecord* best = nullptr;
  for (std::size_t i : drawn) {
    const CandidateRecord& c = population.members()[i];
    if (!best || c.fitness > best->fitness ||
        (c.fitness == best->fitness && c.birth_index > best->birth_index)) {
      best = &c;
    }
  }
  return *best;
}

struct SearchConfig {
  int population_size = 20;
  int sample_size = 0;  // 0 = max(1, round(P/4))
  int budget = 100;
  int max_layers = 10;
  std::uint64_t seed = 1;
  int workers = 1;  // 1 = strictly sequential, bit-deterministic
  int classes = 2;
  TaskKind task = TaskKind::SingleLabel;

  int effective_sample_size() const {
    if (sample_size > 0) return sample_size;
    return std::max(1, (population_size + 2) / 4);
  }
};

inline void check_search_config(const SearchConfig& c) {
  if (c.population_size < 2) throw ConfigError("search: population_size >= 2");
  if (c.budget < c.population_size) {
    throw ConfigError("search: budget must be >= population_size");
  }
  if (c.effective_sample_size() > c.population_size) {
    throw ConfigError("search: sample_size must be <= population_size");
  }
  if (c.max_layers < 2) throw ConfigError("search: max_layers must be >= 2");
  if (c.workers < 1) throw ConfigError("search: workers must be >= 1");
}

struct SearchResult {
  std::vector<CandidateRecord> history;
  std::size_t best_index = 0;  // argmax fitness, earliest on ties
  int budget_spent = 0;

  const CandidateRecord& best() const { return history[best_index]; }
};

/// Streaming observer; called once per evaluated candidate, in history order.
using HistorySink = std::function<void(const CandidateRecord&)>;

namespace detail {

inline CandidateRecord evaluate_candidate(const Evaluator& evaluator,
                                          ArchitectureGenome genome,
                                          std::uint64_t seed,
                                          std::optional<MutationDiff> diff) {
  const auto t0 = std::chrono::steady_clock::now();
  CandidateRecord record;
  record.genome = std::move(genome);
  record.seed = seed;
  record.parent_diff = std::move(diff);
  try {
    EvalOutcome outcome = evaluator(record.genome, seed);
    record.details = outcome;
    if (outcome.failed || !std::isfinite(outcome.fitness)) {
      record.fitness = kNegInf;
      record.details.failed = true;
    } else {
      record.fitness = outcome.fitness;
    }
    record.val_loss = outcome.val_loss;
  } catch (const std::exception& e) {
    // degenerate-architecture tolerance: a failed evaluation scores -inf
    record.fitness = kNegInf;
    record.details.failed = true;
    record.details.fail_reason = e.what();
  }
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return record;
}

inline std::size_t best_of_history(const std::vector<CandidateRecord>& history) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i].fitness > history[best].fitness) best = i;
  }
  return best;
}

}  // namespace detail

/// P random two-layer genomes, trained and inserted in completion order.
/// Exposed for tests; run_search goes through the same logic.
inline Population initialize_population(int population_size, Rng& rng,
                                        const GenomeSpace& space,
                                        const Evaluator& evaluator, int classes,
                                        TaskKind task,
                                        std::vector<CandidateRecord>* history,
                                        const HistorySink& sink = nullptr) {
  if (population_size < 2) throw ConfigError("initialize: population >= 2");
  Population population(static_cast<std::size_t>(population_size));
  for (int i = 0; i < population_size; ++i) {
    ArchitectureGenome genome = new_initial_genome(rng, space, classes, task);
    const std::uint64_t seed = rng.next_u64();
    CandidateRecord record =
        detail::evaluate_candidate(evaluator, std::move(genome), seed, std::nullopt);
    record.birth_index = static_cast<std::uint64_t>(i);
    if (sink) sink(record);
    if (history) history->push_back(record);
    population.insert(std::move(record));
  }
  return population;
}

/// One aging-evolution step: tournament-select a parent, mutate, evaluate,
/// evict the oldest, insert the child.
inline CandidateRecord evolve_step(Population& population, int sample_size,
                                   Rng& rng, const GenomeSpace& space,
                                   const Evaluator& evaluator, int max_layers,
                                   std::uint64_t birth_index,
                                   std::vector<CandidateRecord>* history,
                                   const HistorySink& sink = nullptr) {
  if (!population.full()) {
    throw ConfigError("evolve_step: population must be full");
  }
  const CandidateRecord& parent = select_parent(population, sample_size, rng);
  auto [child_genome, diff] = mutate(parent.genome, rng, space, max_layers);
  const std::uint64_t seed = rng.next_u64();
  CandidateRecord child = detail::evaluate_candidate(
      evaluator, std::move(child_genome), seed, std::move(diff));
  child.birth_index = birth_index;
  population.evict_oldest();
  if (sink) sink(child);
  if (history) history->push_back(child);
  population.insert(child);
  return child;
}

/// The full aging-evolution loop. workers == 1 runs inline and is
/// bit-deterministic under the seed; workers > 1 evaluates candidates on a
/// thread pool (population updates stay serialized, insertion order is
/// completion order, histories vary run to run).
inline SearchResult run_search(const SearchConfig& config,
                               const GenomeSpace& space,
                               const Evaluator& evaluator,
                               const HistorySink& sink = nullptr) {
  check_search_config(config);
  check_space(space);
  const int steps = config.budget - config.population_size;
  SearchResult result;
  Rng rng(config.seed);

  if (config.workers <= 1) {
    Population population = initialize_population(
        config.population_size, rng, space, evaluator, config.classes,
        config.task, &result.history, sink);
    for (int e = 0; e < steps; ++e) {
      evolve_step(population, config.effective_sample_size(), rng, space,
                  evaluator, config.max_layers,
                  static_cast<std::uint64_t>(config.population_size + e),
                  &result.history, sink);
    }
  } else {
    // same draw order as the sequential path for the initial cohort
    std::vector<std::pair<ArchitectureGenome, std::uint64_t>> init_jobs;
    init_jobs.reserve(static_cast<std::size_t>(config.population_size));
    for (int i = 0; i < config.population_size; ++i) {
      ArchitectureGenome g =
          new_initial_genome(rng, space, config.classes, config.task);
      const std::uint64_t seed = rng.next_u64();
      init_jobs.emplace_back(std::move(g), seed);
    }

    Population population(static_cast<std::size_t>(config.population_size));
    std::mutex mu;
    std::uint64_t next_birth = 0;
    std::atomic<int> next_init{0};
    std::atomic<int> next_step{0};

    auto worker = [&] {
      // phase 1: initial cohort
      while (true) {
        const int i = next_init.fetch_add(1);
        if (i >= config.population_size) break;
        CandidateRecord record = detail::evaluate_candidate(
            evaluator, init_jobs[static_cast<std::size_t>(i)].first,
            init_jobs[static_cast<std::size_t>(i)].second, std::nullopt);
        std::lock_guard<std::mutex> lock(mu);
        record.birth_index = next_birth++;
        if (sink) sink(record);
        result.history.push_back(record);
        population.insert(std::move(record));
      }
    };
    {
      std::vector<std::thread> pool;
      for (int w = 0; w < config.workers; ++w) pool.emplace_back(worker);
      for (std::thread& th : pool) th.join();
    }

    auto step_worker = [&] {
      while (true) {
        const int e = next_step.fetch_add(1);
        if (e >= steps) break;
        ArchitectureGenome child_genome;
        std::optional<MutationDiff> diff;
        std::uint64_t seed;
        {
          std::lock_guard<std::mutex> lock(mu);
          const CandidateRecord& parent =
              select_parent(population, config.effective_sample_size(), rng);
          auto mutated = mutate(parent.genome, rng, space, config.max_layers);
          child_genome = std::move(mutated.first);
          diff = std::move(mutated.second);
          seed = rng.next_u64();
        }
        CandidateRecord child = detail::evaluate_candidate(
            evaluator, std::move(child_genome), seed, std::move(diff));
        std::lock_guard<std::mutex> lock(mu);
        child.birth_index = next_birth++;
        population.evict_oldest();
        if (sink) sink(child);
        result.history.push_back(child);
        population.insert(std::move(child));
      }
    };
    {
      std::vector<std::thread> pool;
      for (int w = 0; w < config.workers; ++w) pool.emplace_back(step_worker);
      for (std::thread& th : pool) th.join();
    }
  }

  result.budget_spent = static_cast<int>(result.history.size());
  result.best_index = detail::best_of_history(result.history);
  return result;
}

/// Uniform random genome over the space with the given depth; masks uniform
/// within their per-layer bound.
inline ArchitectureGenome sample_uniform_genome(Rng& rng,
                                                const GenomeSpace& space,
                                                int depth, int classes,
                                                TaskKind task) {
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

/// Random-search baseline under the same budget and evaluator: depth drawn
/// uniformly in [2, max_layers] so deep genomes are reachable.
inline SearchResult run_random_search(const SearchConfig& config,
                                      const GenomeSpace& space,
                                      const Evaluator& evaluator,
                                      const HistorySink& sink = nullptr) {
  check_search_config(config);
  check_space(space);
  SearchResult result;
  Rng rng(config.seed);

  std::vector<std::pair<ArchitectureGenome, std::uint64_t>> jobs;
  jobs.reserve(static_cast<std::size_t>(config.budget));
  for (int i = 0; i < config.budget; ++i) {
    const int depth = rng.uniform_int(2, config.max_layers);
    ArchitectureGenome g =
        sample_uniform_genome(rng, space, depth, config.classes, config.task);
    jobs.emplace_back(std::move(g), rng.next_u64());
  }

  if (config.workers <= 1) {
    for (int i = 0; i < config.budget; ++i) {
      CandidateRecord record = detail::evaluate_candidate(
          evaluator, jobs[static_cast<std::size_t>(i)].first,
          jobs[static_cast<std::size_t>(i)].second, std::nullopt);
      record.birth_index = static_cast<std::uint64_t>(i);
      if (sink) sink(record);
      result.history.push_back(std::move(record));
    }
  } else {
    std::mutex mu;
    std::uint64_t next_birth = 0;
    std::atomic<int> next_job{0};
    auto worker = [&] {
      while (true) {
        const int i = next_job.fetch_add(1);
        if (i >= config.budget) break;
        CandidateRecord record = detail::evaluate_candidate(
            evaluator, jobs[static_cast<std::size_t>(i)].first,
            jobs[static_cast<std::size_t>(i)].second, std::nullopt);
        std::lock_guard<std::mutex> lock(mu);
        record.birth_index = next_birth++;
        if (sink) sink(record);
        result.history.push_back(std::move(record));
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < config.workers; ++w) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  result.budget_spent = static_cast<int>(result.history.size());
  result.best_index = detail::best_of_history(result.history);
  return result;
}

}  // namespace evognn
