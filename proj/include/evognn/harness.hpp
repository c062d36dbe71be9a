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

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "evognn/dataset.hpp"
#include "evognn/evolution.hpp"
#include "evognn/gnn.hpp"
#include "evognn/hyperopt.hpp"
#include "evognn/sbm.hpp"

namespace evognn::harness {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// --- configuration --------------------------------------------------------

struct RunConfig {
  int population_size = 20;
  int sample_size = 0;  // 0 = population_size / 4, at least 1
  int budget = 100;
  int max_layers = 10;
  std::uint64_t seed = 1;
  int workers = 1;
  bool sequential = false;  // forces one worker and a timing-free history log
  std::string strategy = "evolution";  // or "random"
  std::string tuning = "off";          // or "on"
  int tune_trials = 50;
  Hyperparams train;
  std::string dataset_path;
  std::string out_dir = "evognn-out";
  GenomeSpace genome_space;
  HyperparamSpace hyper_space = HyperparamSpace::training_defaults();
  std::size_t param_cap = kDefaultParamCap;

  int effective_workers() const { return sequential ? 1 : workers; }
  bool deterministic() const { return effective_workers() <= 1; }
};

inline ordered_json genome_space_to_json(const GenomeSpace& s) {
  ordered_json j;
  auto names = [](const auto& values) {
    ordered_json arr = ordered_json::array();
    for (const auto& v : values) arr.push_back(to_string(v));
    return arr;
  };
  j["attention_fns"] = names(s.attention_fns);
  j["heads"] = s.heads;
  j["hidden_dims"] = s.hidden_dims;
  j["aggregators"] = names(s.aggregators);
  j["activations"] = names(s.activations);
  j["allow_layer_add"] = s.allow_layer_add;
  return j;
}

inline GenomeSpace genome_space_from_json(const json& j) {
  GenomeSpace s;
  if (j.contains("attention_fns")) {
    s.attention_fns.clear();
    for (const auto& v : j.at("attention_fns"))
      s.attention_fns.push_back(parse_attention_kind(v.get<std::string>()));
  }
  if (j.contains("heads")) s.heads = j.at("heads").get<std::vector<int>>();
  if (j.contains("hidden_dims"))
    s.hidden_dims = j.at("hidden_dims").get<std::vector<int>>();
  if (j.contains("aggregators")) {
    s.aggregators.clear();
    for (const auto& v : j.at("aggregators"))
      s.aggregators.push_back(parse_aggregator(v.get<std::string>()));
  }
  if (j.contains("activations")) {
    s.activations.clear();
    for (const auto& v : j.at("activations"))
      s.activations.push_back(parse_activation(v.get<std::string>()));
  }
  if (j.contains("allow_layer_add"))
    s.allow_layer_add = j.at("allow_layer_add").get<bool>();
  check_space(s);
  return s;
}

inline ordered_json hyperparams_to_json(const Hyperparams& hp) {
  ordered_json j;
  j["lr"] = hp.lr;
  j["weight_decay"] = hp.weight_decay;
  j["dropout"] = hp.dropout;
  j["max_epochs"] = hp.max_epochs;
  j["patience"] = hp.patience;
  return j;
}

inline Hyperparams hyperparams_from_json(const json& j) {
  Hyperparams hp;
  if (j.contains("lr")) hp.lr = j.at("lr").get<double>();
  if (j.contains("weight_decay"))
    hp.weight_decay = j.at("weight_decay").get<double>();
  if (j.contains("dropout")) hp.dropout = j.at("dropout").get<double>();
  if (j.contains("max_epochs")) hp.max_epochs = j.at("max_epochs").get<int>();
  if (j.contains("patience")) hp.patience = j.at("patience").get<int>();
  return hp;
}

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  if (j.contains("population_size"))
    c.population_size = j.at("population_size").get<int>();
  if (j.contains("sample_size")) c.sample_size = j.at("sample_size").get<int>();
  if (j.contains("budget")) c.budget = j.at("budget").get<int>();
  if (j.contains("max_layers")) c.max_layers = j.at("max_layers").get<int>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("workers")) c.workers = j.at("workers").get<int>();
  if (j.contains("sequential")) c.sequential = j.at("sequential").get<bool>();
  if (j.contains("strategy")) c.strategy = j.at("strategy").get<std::string>();
  if (j.contains("tuning")) c.tuning = j.at("tuning").get<std::string>();
  if (j.contains("tune_trials")) c.tune_trials = j.at("tune_trials").get<int>();
  if (j.contains("train")) c.train = hyperparams_from_json(j.at("train"));
  if (j.contains("dataset_path"))
    c.dataset_path = j.at("dataset_path").get<std::string>();
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("genome_space"))
    c.genome_space = genome_space_from_json(j.at("genome_space"));
  if (j.contains("hyper_space"))
    c.hyper_space = space_from_json(j.at("hyper_space"));
  if (j.contains("param_cap")) c.param_cap = j.at("param_cap").get<std::size_t>();
  return c;
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse: ") + e.what());
  }
  return config_from_json(j);
}

inline void validate_config(const RunConfig& c, bool needs_dataset = true) {
  if (c.strategy != "evolution" && c.strategy != "random") {
    throw ConfigError("strategy must be 'evolution' or 'random'");
  }
  if (c.tuning != "on" && c.tuning != "off") {
    throw ConfigError("tuning must be 'on' or 'off'");
  }
  if (c.tuning == "on") {
    if (c.tune_trials < 1) throw ConfigError("tune_trials must be >= 1");
    check_space(c.hyper_space);
    for (const HyperDim& d : c.hyper_space.dims) {
      if (d.name != "lr" && d.name != "weight_decay" && d.name != "dropout") {
        throw ConfigError("hyper space dimension '" + d.name +
                          "' is not a training hyperparameter");
      }
    }
  }
  check_space(c.genome_space);
  if (c.train.max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
  if (c.train.patience < 0) throw ConfigError("train.patience must be >= 0");
  if (needs_dataset && c.dataset_path.empty()) {
    throw ConfigError("dataset_path is required");
  }
  SearchConfig sc;
  sc.population_size = c.population_size;
  sc.sample_size = c.sample_size;
  sc.budget = c.budget;
  sc.max_layers = c.max_layers;
  sc.workers = c.effective_workers();
  check_search_config(sc);
}

inline SearchConfig to_search_config(const RunConfig& c, const GraphDataset& d) {
  SearchConfig sc;
  sc.population_size = c.population_size;
  sc.sample_size = c.sample_size;
  sc.budget = c.budget;
  sc.max_layers = c.max_layers;
  sc.seed = c.seed;
  sc.workers = c.effective_workers();
  sc.classes = d.classes;
  sc.task = d.task;
  return sc;
}

// --- history log ------------------------------------------------------------

inline ordered_json fitness_field(double v) {
  // JSON has no infinities; failed candidates serialize as null
  if (!std::isfinite(v)) return nullptr;
  return v;
}

inline ordered_json record_to_json(const CandidateRecord& c, bool suppress_wall) {
  ordered_json j;
  j["i"] = c.birth_index;
  j["genome"] = genome_to_json(c.genome);
  j["diff"] = c.parent_diff ? ordered_json(diff_to_json(*c.parent_diff))
                            : ordered_json(nullptr);
  j["fitness"] = fitness_field(c.fitness);
  j["val_loss"] = fitness_field(c.val_loss);
  j["failed"] = c.details.failed;
  j["seed"] = c.seed;
  j["wall_ms"] = suppress_wall
                     ? std::int64_t{0}
                     : static_cast<std::int64_t>(c.wall_seconds * 1000.0);
  j["details"] = c.details.details.is_null() ? ordered_json::object()
                                             : c.details.details;
  return j;
}

inline CandidateRecord record_from_json(const json& j) {
  CandidateRecord c;
  c.birth_index = j.at("i").get<std::uint64_t>();
  c.genome = genome_from_json(j.at("genome"));
  if (!j.at("diff").is_null()) c.parent_diff = diff_from_json(j.at("diff"));
  c.fitness = j.at("fitness").is_null() ? kNegInf : j.at("fitness").get<double>();
  c.val_loss = j.at("val_loss").is_null()
                   ? std::numeric_limits<double>::infinity()
                   : j.at("val_loss").get<double>();
  c.details.failed = j.value("failed", false);
  c.details.fitness = c.fitness;
  c.details.val_loss = c.val_loss;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.wall_seconds = static_cast<double>(j.value("wall_ms", std::int64_t{0})) / 1000.0;
  if (j.contains("details")) c.details.details = j.at("details");
  return c;
}

/// Append-only line-delimited history with a versioned header line. Every
/// line is flushed so an interrupted run keeps what it paid for.
class HistoryWriter {
 public:
  HistoryWriter(const fs::path& path, const ordered_json& header_fields,
                bool suppress_wall)
      : out_(path, std::ios::trunc), suppress_wall_(suppress_wall) {
    if (!out_) throw LoadError("cannot open history log: " + path.string());
    ordered_json header;
    header["format"] = "evognn-history";
    header["version"] = 1;
    for (const auto& [k, v] : header_fields.items()) header[k] = v;
    out_ << header.dump() << "\n";
    out_.flush();
  }

  void append(const CandidateRecord& c) {
    std::lock_guard<std::mutex> lock(mu_);
    out_ << record_to_json(c, suppress_wall_).dump() << "\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
  bool suppress_wall_;
  std::mutex mu_;
};

struct HistoryFile {
  ordered_json header;
  std::vector<CandidateRecord> records;
  int skipped_lines = 0;
};

inline HistoryFile read_history(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open history log: " + path.string());
  HistoryFile hf;
  std::string line;
  if (!std::getline(in, line)) throw LoadError("empty history log");
  try {
    hf.header = json::parse(line);
    if (hf.header.at("format") != "evognn-history") {
      throw LoadError("not an evognn history log");
    }
  } catch (const json::exception&) {
    throw LoadError("malformed history header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      hf.records.push_back(record_from_json(json::parse(line)));
    } catch (const std::exception&) {
      ++hf.skipped_lines;
    }
  }
  return hf;
}

// --- evaluators ---------------------------------------------------------------

/// Maps a tuned point onto training hyperparameters; dimensions the space
/// does not mention keep the configured fixed values.
inline Hyperparams apply_point(const Hyperparams& base,
                               const HyperparamSpace& space,
                               const HyperPoint& point) {
  Hyperparams hp = base;
  for (std::size_t d = 0; d < space.dims.size(); ++d) {
    const std::string& name = space.dims[d].name;
    if (name == "lr") hp.lr = point[d];
    else if (name == "weight_decay") hp.weight_decay = point[d];
    else if (name == "dropout") hp.dropout = point[d];
  }
  return hp;
}

/// Trains a candidate with the fixed hyperparameter point (tuning off) or a
/// per-candidate TPE loop (tuning on). Fitness is the validation metric; the
/// details blob carries what cmd_search needs to retrain the winner.
inline Evaluator make_training_evaluator(const RunConfig& config,
                                         const GraphDataset& data) {
  return [&config, &data](const ArchitectureGenome& genome,
                          std::uint64_t seed) -> EvalOutcome {
    EvalOutcome out;
    auto fill = [&](const TrainedModel& tm, std::uint64_t train_seed) {
      out.fitness = tm.summary.failed ? kNegInf : tm.summary.val_metric;
      out.val_loss = tm.summary.best_val_loss;
      out.failed = tm.summary.failed;
      out.fail_reason = tm.summary.fail_reason;
      out.details["hyperparams"] = hyperparams_to_json(tm.hyperparams);
      out.details["train_seed"] = train_seed;
      out.details["best_epoch"] = tm.summary.best_epoch;
      out.details["epochs"] = tm.summary.epochs_run;
      out.details["param_count"] = tm.summary.param_count;
      if (tm.summary.failed) out.details["fail_reason"] = tm.summary.fail_reason;
    };

    if (config.tuning == "off") {
      Rng rng(seed);
      TrainedModel tm = train(genome, data, config.train, rng);
      fill(tm, seed);
      return out;
    }

    // tuning on: one TPE loop per candidate, scored on the validation metric
    std::optional<TrainedModel> best_model;
    std::uint64_t best_seed = 0;
    int trial_index = 0;
    Objective objective = [&](const HyperPoint& point) -> std::optional<double> {
      const std::uint64_t trial_seed =
          mix_seed(seed, static_cast<std::uint64_t>(trial_index++));
      Rng rng(trial_seed);
      TrainedModel tm =
          train(genome, data, apply_point(config.train, config.hyper_space, point), rng);
      if (tm.summary.failed) return std::nullopt;
      const double score = tm.summary.val_metric;
      if (!best_model || score > best_model->summary.val_metric) {
        best_model = std::move(tm);
        best_seed = trial_seed;
      }
      return score;
    };
    try {
      Rng tune_rng(mix_seed(seed, 0xface));
      TuneResult tuned =
          tune(objective, config.hyper_space, config.tune_trials, tune_rng);
      fill(*best_model, best_seed);
      out.details["tuning"] = ordered_json{{"trials", tuned.trials.size()},
                                           {"best_trial", tuned.best_index}};
    } catch (const TuningError& e) {
      out.failed = true;
      out.fail_reason = e.what();
      out.details["fail_reason"] = e.what();
    }
    return out;
  };
}

// --- commands -------------------------------------------------------------

inline ArchitectureGenome load_genome_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open genome file: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return canonical_parse(text);
}

inline void write_genome_file(const ArchitectureGenome& g, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw LoadError("cannot write genome file: " + path.string());
  out << canonical_serialize(g) << "\n";
}

inline ordered_json train_doc(const TrainedModel& tm, const GraphDataset& data) {
  ordered_json doc;
  doc["genome"] = genome_to_json(tm.genome);
  doc["hyperparams"] = hyperparams_to_json(tm.hyperparams);
  doc["failed"] = tm.summary.failed;
  if (tm.summary.failed) {
    doc["fail_reason"] = tm.summary.fail_reason;
    return doc;
  }
  doc["param_count"] = tm.summary.param_count;
  doc["epochs"] = tm.summary.epochs_run;
  doc["best_epoch"] = tm.summary.best_epoch;
  doc["val_loss"] = fitness_field(tm.summary.best_val_loss);
  doc["metric_name"] =
      data.task == TaskKind::SingleLabel ? "accuracy" : "micro_f1";
  doc["train_metric"] = evaluate(tm, data, "train");
  doc["val_metric"] = tm.summary.val_metric;
  doc["test_metric"] = evaluate(tm, data, "test");
  doc["wall_seconds"] = tm.summary.wall_seconds;
  return doc;
}

/// search: run the configured strategy, stream the history log, retrain the
/// winner once for its test metric, and write the result document.
inline ordered_json cmd_search(const RunConfig& config) {
  validate_config(config);
  GraphDataset data = load_bundle(config.dataset_path);
  const auto t0 = std::chrono::steady_clock::now();

  fs::create_directories(config.out_dir);
  ordered_json header;
  header["strategy"] = config.strategy;
  header["seed"] = config.seed;
  header["population_size"] = config.population_size;
  header["sample_size"] = config.sample_size;
  header["budget"] = config.budget;
  header["max_layers"] = config.max_layers;
  header["tuning"] = config.tuning;
  header["dataset"] = data.name;
  const fs::path history_path = fs::path(config.out_dir) / "history.jsonl";
  HistoryWriter writer(history_path, header, config.deterministic());

  Evaluator evaluator = make_training_evaluator(config, data);
  SearchConfig sc = to_search_config(config, data);
  HistorySink sink = [&writer](const CandidateRecord& c) { writer.append(c); };
  SearchResult result = config.strategy == "evolution"
                            ? run_search(sc, config.genome_space, evaluator, sink)
                            : run_random_search(sc, config.genome_space, evaluator, sink);

  const CandidateRecord& best = result.best();
  ordered_json doc;
  doc["strategy"] = config.strategy;
  doc["budget"] = result.budget_spent;
  doc["best_index"] = best.birth_index;
  doc["best_genome"] = genome_to_json(best.genome);
  doc["fitness"] = fitness_field(best.fitness);
  doc["val_loss"] = fitness_field(best.val_loss);
  doc["metric_name"] =
      data.task == TaskKind::SingleLabel ? "accuracy" : "micro_f1";

  // test metric only for the final selected model, via an exact retrain
  if (std::isfinite(best.fitness) && best.details.details.contains("train_seed")) {
    Hyperparams hp = hyperparams_from_json(best.details.details.at("hyperparams"));
    Rng rng(best.details.details.at("train_seed").get<std::uint64_t>());
    TrainedModel tm = train(best.genome, data, hp, rng);
    doc["test_metric"] = tm.summary.failed
                             ? ordered_json(nullptr)
                             : ordered_json(evaluate(tm, data, "test"));
    doc["hyperparams"] = hyperparams_to_json(hp);
  } else {
    doc["test_metric"] = nullptr;
  }
  doc["wall_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  doc["history"] = history_path.string();

  std::ofstream out(fs::path(config.out_dir) / "result.json");
  out << doc.dump(2) << "\n";
  return doc;
}

/// train: one genome, one hyperparameter point, full metric printout.
inline ordered_json cmd_train(const fs::path& genome_path,
                              const fs::path& dataset_path,
                              const Hyperparams& hp, std::uint64_t seed,
                              const GenomeSpace& space = GenomeSpace::defaults()) {
  ArchitectureGenome genome = load_genome_file(genome_path);
  auto violations = validate(genome, space);
  if (!violations.empty()) {
    std::string msg = "genome invalid:";
    for (const std::string& v : violations) msg += "\n  " + v;
    throw ConfigError(msg);
  }
  GraphDataset data = load_bundle(dataset_path);
  Rng rng(seed);
  TrainedModel tm = train(genome, data, hp, rng);
  return train_doc(tm, data);
}

/// tune: TPE over the training hyperparameters of one genome; trials are
/// streamed to a log so interrupted runs keep their prefix.
inline ordered_json cmd_tune(const fs::path& genome_path,
                             const fs::path& dataset_path,
                             const HyperparamSpace& space, int max_trials,
                             std::uint64_t seed, const Hyperparams& base,
                             const fs::path& out_dir,
                             const GenomeSpace& genome_space = GenomeSpace::defaults()) {
  ArchitectureGenome genome = load_genome_file(genome_path);
  auto violations = validate(genome, genome_space);
  if (!violations.empty()) {
    std::string msg = "genome invalid:";
    for (const std::string& v : violations) msg += "\n  " + v;
    throw ConfigError(msg);
  }
  GraphDataset data = load_bundle(dataset_path);
  fs::create_directories(out_dir);
  std::ofstream trial_log(out_dir / "trials.jsonl", std::ios::trunc);
  {
    ordered_json header;
    header["format"] = "evognn-trials";
    header["version"] = 1;
    header["genome"] = genome_to_json(genome);
    header["space"] = space_to_json(space);
    header["seed"] = seed;
    trial_log << header.dump() << "\n";
    trial_log.flush();
  }

  std::optional<TrainedModel> best_model;
  int trial_index = 0;
  Objective objective = [&](const HyperPoint& point) -> std::optional<double> {
    const std::uint64_t trial_seed =
        mix_seed(seed, static_cast<std::uint64_t>(trial_index));
    Rng rng(trial_seed);
    TrainedModel tm = train(genome, data, apply_point(base, space, point), rng);
    TrialRecord rec;
    rec.point = point;
    rec.ok = !tm.summary.failed;
    if (rec.ok) rec.score = tm.summary.val_metric;
    ordered_json line = trial_to_json(rec, space);
    line["trial"] = trial_index;
    line["seed"] = trial_seed;
    trial_log << line.dump() << "\n";
    trial_log.flush();
    ++trial_index;
    if (tm.summary.failed) return std::nullopt;
    const double score = tm.summary.val_metric;
    if (!best_model || score > best_model->summary.val_metric) {
      best_model = std::move(tm);
    }
    return score;
  };

  Rng tune_rng(seed);
  TuneResult result = tune(objective, space, max_trials, tune_rng);

  ordered_json doc;
  doc["genome"] = genome_to_json(genome);
  doc["trials"] = result.trials.size();
  int failed = 0;
  for (const TrialRecord& t : result.trials) failed += !t.ok;
  doc["failed_trials"] = failed;
  doc["best_trial"] = result.best_index;
  auto& point = doc["best_point"] = ordered_json::object();
  for (std::size_t d = 0; d < space.dims.size(); ++d) {
    point[space.dims[d].name] = result.best.point[d];
  }
  doc["metric_name"] =
      data.task == TaskKind::SingleLabel ? "accuracy" : "micro_f1";
  doc["val_metric"] = result.best.score;
  doc["test_metric"] = evaluate(*best_model, data, "test");
  std::ofstream out(out_dir / "best.json");
  out << doc.dump(2) << "\n";
  return doc;
}

/// compare: running-best curves per strategy x seed, plus per-strategy
/// medians. Individual runs are sequential (deterministic); runs execute
/// concurrently up to the configured worker count.
inline ordered_json cmd_compare(const RunConfig& config,
                                const std::vector<std::string>& strategies,
                                const std::vector<std::uint64_t>& seeds) {
  if (strategies.empty()) throw ConfigError("compare: no strategies given");
  for (const std::string& s : strategies) {
    if (s != "evolution" && s != "random") {
      throw ConfigError("compare: unknown strategy '" + s + "'");
    }
  }
  validate_config(config);
  GraphDataset data = load_bundle(config.dataset_path);
  fs::create_directories(config.out_dir);

  struct Run {
    std::string strategy;
    std::uint64_t seed;
    std::vector<double> best_curve;
  };
  std::vector<Run> runs;
  for (const std::string& strategy : strategies) {
    for (std::uint64_t seed : seeds) {
      runs.push_back({strategy, seed, {}});
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= runs.size()) break;
      Run& run = runs[i];
      RunConfig rc = config;
      rc.seed = run.seed;
      rc.strategy = run.strategy;
      Evaluator evaluator = make_training_evaluator(rc, data);
      SearchConfig sc = to_search_config(rc, data);
      sc.workers = 1;
      SearchResult result =
          run.strategy == "evolution"
              ? run_search(sc, rc.genome_space, evaluator)
              : run_random_search(sc, rc.genome_space, evaluator);
      double best = kNegInf;
      for (const CandidateRecord& c : result.history) {
        best = std::max(best, c.fitness);
        run.best_curve.push_back(best);
      }
    }
  };
  {
    const int nthreads = std::min<int>(config.effective_workers(),
                                       static_cast<int>(runs.size()));
    std::vector<std::thread> pool;
    for (int w = 0; w < std::max(1, nthreads); ++w) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  const fs::path curves_path = fs::path(config.out_dir) / "compare.csv";
  {
    std::ofstream out(curves_path, std::ios::trunc);
    out << "strategy,seed,eval,best_fitness\n";
    for (const Run& run : runs) {
      for (std::size_t e = 0; e < run.best_curve.size(); ++e) {
        out << run.strategy << "," << run.seed << "," << e << ","
            << run.best_curve[e] << "\n";
      }
    }
  }

  auto median_at = [&](const std::string& strategy, std::size_t e) {
    std::vector<double> vals;
    for (const Run& run : runs) {
      if (run.strategy == strategy && e < run.best_curve.size()) {
        vals.push_back(run.best_curve[e]);
      }
    }
    std::sort(vals.begin(), vals.end());
    return vals[vals.size() / 2];
  };

  const fs::path medians_path = fs::path(config.out_dir) / "compare_median.csv";
  ordered_json doc;
  doc["budget"] = config.budget;
  doc["seeds"] = seeds.size();
  auto& finals = doc["final_median_best"] = ordered_json::object();
  {
    std::ofstream out(medians_path, std::ios::trunc);
    out << "strategy,eval,median_best\n";
    for (const std::string& strategy : strategies) {
      for (int e = 0; e < config.budget; ++e) {
        out << strategy << "," << e << ","
            << median_at(strategy, static_cast<std::size_t>(e)) << "\n";
      }
      finals[strategy] = median_at(strategy, static_cast<std::size_t>(config.budget) - 1);
    }
  }
  doc["curves"] = curves_path.string();
  doc["medians"] = medians_path.string();
  return doc;
}

/// report: replay a history log into a summary (best candidate, depth
/// histogram, best fitness per depth).
inline ordered_json cmd_report(const fs::path& history_path) {
  HistoryFile hf = read_history(history_path);
  ordered_json doc;
  doc["evaluations"] = hf.records.size();
  doc["skipped_lines"] = hf.skipped_lines;
  if (hf.records.empty()) {
    doc["best"] = nullptr;
    doc["depth_histogram"] = ordered_json::object();
    doc["best_fitness_by_depth"] = ordered_json::object();
    return doc;
  }
  std::size_t best = 0;
  std::map<int, int> depth_hist;
  std::map<int, double> best_by_depth;
  int failed = 0;
  for (std::size_t i = 0; i < hf.records.size(); ++i) {
    const CandidateRecord& c = hf.records[i];
    if (c.fitness > hf.records[best].fitness) best = i;
    const int depth = c.genome.depth();
    ++depth_hist[depth];
    failed += c.details.failed;
    if (std::isfinite(c.fitness)) {
      auto it = best_by_depth.find(depth);
      if (it == best_by_depth.end() || c.fitness > it->second) {
        best_by_depth[depth] = c.fitness;
      }
    }
  }
  doc["failed"] = failed;
  ordered_json best_doc;
  best_doc["index"] = hf.records[best].birth_index;
  best_doc["fitness"] = fitness_field(hf.records[best].fitness);
  best_doc["val_loss"] = fitness_field(hf.records[best].val_loss);
  best_doc["depth"] = hf.records[best].genome.depth();
  best_doc["genome"] = genome_to_json(hf.records[best].genome);
  doc["best"] = best_doc;
  auto& hist = doc["depth_histogram"] = ordered_json::object();
  for (auto [depth, count] : depth_hist) hist[std::to_string(depth)] = count;
  auto& by_depth = doc["best_fitness_by_depth"] = ordered_json::object();
  for (auto [depth, fitness] : best_by_depth) {
    by_depth[std::to_string(depth)] = fitness;
  }
  return doc;
}

}  // namespace evognn::harness
