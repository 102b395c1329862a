#include <cstdint>
#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fedgbdt/errors.hpp"
#include "fedgbdt/experiment.hpp"
#include "fedgbdt/serialize.hpp"

namespace {

// Exit codes: 0 success, 1 config, 2 training, 3 attack, 4 evaluation.
int run_guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const fedgbdt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const fedgbdt::TrainError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return 2;
  } catch (const fedgbdt::AttackError& e) {
    std::cerr << "attack error: " << e.what() << "\n";
    return 3;
  } catch (const fedgbdt::EvalError& e) {
    std::cerr << "evaluation error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedgbdt - federated gradient boosting, reconstruction attack and evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  double time_limit = -1.0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config file")->required();
    cmd->add_option("--seed", seed, "override the root seed");
    cmd->add_option("--out", out_dir, "override the output directory");
    cmd->add_option("--time-limit", time_limit, "override the per-tree solver budget (seconds)");
    return cmd;
  };

  auto* cmd_partition = add_common(app.add_subcommand(
      "partition", "load the dataset and write the non-IID client shards"));
  auto* cmd_train = add_common(
      app.add_subcommand("train", "run the federated protocol and write models and views"));
  auto* cmd_attack = add_common(
      app.add_subcommand("attack", "run the reconstruction attack against the written views"));
  auto* cmd_evaluate = add_common(
      app.add_subcommand("evaluate", "score the written reconstruction against the ground truth"));
  auto* cmd_run =
      add_common(app.add_subcommand("run", "full pipeline: partition, train, attack, evaluate"));
  auto* cmd_sweep = add_common(
      app.add_subcommand("sweep", "one run per value of the config's sweep axis"));

  CLI11_PARSE(app, argc, argv);

  return run_guarded([&] {
    fedgbdt::ExperimentSpec spec = fedgbdt::load_experiment(config_path);
    for (auto* cmd : {cmd_partition, cmd_train, cmd_attack, cmd_evaluate, cmd_run, cmd_sweep}) {
      if (!cmd->parsed()) continue;
      if (cmd->count("--seed")) {
        spec.seed = seed;
        spec.fed.seed = seed;
      }
      if (cmd->count("--out")) spec.out_dir = out_dir;
      if (cmd->count("--time-limit")) spec.attack.time_limit_s = time_limit;
    }

    if (cmd_partition->parsed()) {
      fedgbdt::stage_partition(spec);
    } else if (cmd_train->parsed()) {
      fedgbdt::stage_train(spec);
    } else if (cmd_attack->parsed()) {
      fedgbdt::stage_attack(spec);
    } else if (cmd_evaluate->parsed()) {
      auto row = fedgbdt::stage_evaluate(spec);
      std::cout << fedgbdt::summary_csv_header() << fedgbdt::summary_csv_row(row);
    } else if (cmd_run->parsed()) {
      auto result = fedgbdt::run_experiment(spec);
      std::cout << fedgbdt::summary_csv_header() << fedgbdt::summary_csv_row(result.summary);
    } else if (cmd_sweep->parsed()) {
      auto sweep = fedgbdt::sweep_from_json(fedgbdt::read_text_file(config_path));
      if (!sweep) throw fedgbdt::ConfigError("sweep: config has no sweep section");
      auto rows = fedgbdt::run_sweep(spec, *sweep);
      std::cout << fedgbdt::summary_csv_header();
      for (const auto& row : rows) std::cout << fedgbdt::summary_csv_row(row);
    }
  });
}
