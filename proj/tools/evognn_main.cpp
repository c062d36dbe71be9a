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

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evognn/harness.hpp"

namespace {

using namespace evognn;
using harness::RunConfig;

struct CommonFlags {
  std::string config_path;
  bool has_seed = false;
  std::uint64_t seed = 0;
  bool has_workers = false;
  int workers = 0;
  bool sequential = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file");
  cmd->add_option("--seed", flags.seed, "random seed")
      ->each([&flags](const std::string&) { flags.has_seed = true; });
  cmd->add_option("--workers", flags.workers, "parallel evaluation workers")
      ->each([&flags](const std::string&) { flags.has_workers = true; });
  cmd->add_flag("--sequential", flags.sequential,
                "single worker, bit-reproducible history log");
}

RunConfig make_config(const CommonFlags& flags) {
  RunConfig config;
  if (!flags.config_path.empty()) {
    config = harness::load_config(flags.config_path);
  }
  if (flags.has_seed) config.seed = flags.seed;
  if (flags.has_workers) config.workers = flags.workers;
  if (flags.sequential) config.sequential = true;
  return config;
}

void emit_error(const std::string& kind, const std::string& message) {
  nlohmann::ordered_json err;
  err["error"] = {{"kind", kind}, {"message", message}};
  std::cerr << err.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evolutionary architecture search for graph neural networks"};
  app.require_subcommand(1);

  // search
  CommonFlags search_flags;
  std::string dataset_flag, out_flag, strategy_flag, tuning_flag;
  int population_flag = -1, sample_flag = -1, budget_flag = -1, layers_flag = -1;
  int tune_trials_flag = -1;
  CLI::App* search = app.add_subcommand("search", "run an architecture search");
  add_common(search, search_flags);
  search->add_option("--dataset", dataset_flag, "dataset bundle directory");
  search->add_option("--out", out_flag, "output directory");
  search->add_option("--strategy", strategy_flag, "evolution | random");
  search->add_option("--tuning", tuning_flag, "on | off");
  search->add_option("--population-size", population_flag, "population size P");
  search->add_option("--sample-size", sample_flag, "tournament sample S");
  search->add_option("--budget", budget_flag, "total architectures to evaluate");
  search->add_option("--max-layers", layers_flag, "depth cap for layer_add");
  search->add_option("--tune-trials", tune_trials_flag, "TPE trials per candidate");

  // train
  CommonFlags train_flags;
  std::string train_genome, train_dataset;
  double lr_flag = -1, wd_flag = -1, dropout_flag = -1;
  int epochs_flag = -1, patience_flag = -1;
  CLI::App* train_cmd = app.add_subcommand("train", "train one genome");
  add_common(train_cmd, train_flags);
  train_cmd->add_option("--genome", train_genome, "genome file")->required();
  train_cmd->add_option("--dataset", train_dataset, "dataset bundle directory");
  train_cmd->add_option("--lr", lr_flag, "learning rate");
  train_cmd->add_option("--weight-decay", wd_flag, "L2 weight decay");
  train_cmd->add_option("--dropout", dropout_flag, "input dropout rate");
  train_cmd->add_option("--max-epochs", epochs_flag, "epoch cap");
  train_cmd->add_option("--patience", patience_flag, "early-stopping patience");

  // tune
  CommonFlags tune_flags;
  std::string tune_genome, tune_dataset, tune_out;
  int trials_flag = -1;
  CLI::App* tune_cmd = app.add_subcommand("tune", "TPE-tune one genome");
  add_common(tune_cmd, tune_flags);
  tune_cmd->add_option("--genome", tune_genome, "genome file")->required();
  tune_cmd->add_option("--dataset", tune_dataset, "dataset bundle directory");
  tune_cmd->add_option("--trials", trials_flag, "TPE trial budget");
  tune_cmd->add_option("--out", tune_out, "output directory");

  // compare
  CommonFlags compare_flags;
  std::string compare_dataset, compare_out;
  std::vector<std::string> strategies_flag;
  std::vector<std::uint64_t> seeds_flag;
  int compare_budget = -1, compare_pop = -1;
  CLI::App* compare_cmd =
      app.add_subcommand("compare", "compare search strategies across seeds");
  add_common(compare_cmd, compare_flags);
  compare_cmd->add_option("--dataset", compare_dataset, "dataset bundle directory");
  compare_cmd->add_option("--out", compare_out, "output directory");
  compare_cmd->add_option("--strategies", strategies_flag, "strategy list")
      ->delimiter(',');
  compare_cmd->add_option("--seeds", seeds_flag, "seed list")->delimiter(',');
  compare_cmd->add_option("--budget", compare_budget, "evaluations per run");
  compare_cmd->add_option("--population-size", compare_pop, "population size P");

  // report
  std::string report_history;
  CLI::App* report_cmd = app.add_subcommand("report", "summarize a history log");
  report_cmd->add_option("--history", report_history, "history log file")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (search->parsed()) {
      RunConfig config = make_config(search_flags);
      if (!dataset_flag.empty()) config.dataset_path = dataset_flag;
      if (!out_flag.empty()) config.out_dir = out_flag;
      if (!strategy_flag.empty()) config.strategy = strategy_flag;
      if (!tuning_flag.empty()) config.tuning = tuning_flag;
      if (population_flag > 0) config.population_size = population_flag;
      if (sample_flag > 0) config.sample_size = sample_flag;
      if (budget_flag > 0) config.budget = budget_flag;
      if (layers_flag > 0) config.max_layers = layers_flag;
      if (tune_trials_flag > 0) config.tune_trials = tune_trials_flag;
      std::cout << harness::cmd_search(config).dump(2) << std::endl;
    } else if (train_cmd->parsed()) {
      RunConfig config = make_config(train_flags);
      if (!train_dataset.empty()) config.dataset_path = train_dataset;
      if (config.dataset_path.empty()) throw ConfigError("--dataset is required");
      Hyperparams hp = config.train;
      if (lr_flag >= 0) hp.lr = lr_flag;
      if (wd_flag >= 0) hp.weight_decay = wd_flag;
      if (dropout_flag >= 0) hp.dropout = dropout_flag;
      if (epochs_flag > 0) hp.max_epochs = epochs_flag;
      if (patience_flag >= 0) hp.patience = patience_flag;
      std::cout << harness::cmd_train(train_genome, config.dataset_path, hp,
                                      config.seed, config.genome_space)
                       .dump(2)
                << std::endl;
    } else if (tune_cmd->parsed()) {
      RunConfig config = make_config(tune_flags);
      if (!tune_dataset.empty()) config.dataset_path = tune_dataset;
      if (config.dataset_path.empty()) throw ConfigError("--dataset is required");
      if (!tune_out.empty()) config.out_dir = tune_out;
      if (trials_flag > 0) config.tune_trials = trials_flag;
      std::cout << harness::cmd_tune(tune_genome, config.dataset_path,
                                     config.hyper_space, config.tune_trials,
                                     config.seed, config.train, config.out_dir,
                                     config.genome_space)
                       .dump(2)
                << std::endl;
    } else if (compare_cmd->parsed()) {
      RunConfig config = make_config(compare_flags);
      if (!compare_dataset.empty()) config.dataset_path = compare_dataset;
      if (!compare_out.empty()) config.out_dir = compare_out;
      if (compare_budget > 0) config.budget = compare_budget;
      if (compare_pop > 0) config.population_size = compare_pop;
      if (strategies_flag.empty()) strategies_flag = {"evolution", "random"};
      std::vector<std::uint64_t> seeds = seeds_flag;
      if (seeds.empty()) seeds = {config.seed};
      std::cout << harness::cmd_compare(config, strategies_flag, seeds).dump(2)
                << std::endl;
    } else if (report_cmd->parsed()) {
      std::cout << harness::cmd_report(report_history).dump(2) << std::endl;
    }
  } catch (const ConfigError& e) {
    emit_error("config", e.what());
    return 2;
  } catch (const LoadError& e) {
    emit_error("load", e.what());
    return 3;
  } catch (const FormatError& e) {
    emit_error("format", e.what());
    return 4;
  } catch (const TuningError& e) {
    emit_error("tuning", e.what());
    return 5;
  } catch (const std::exception& e) {
    emit_error("internal", e.what());
    return 1;
  }
  return 0;
}
