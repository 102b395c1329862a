#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fedgbdt/attack.hpp"
#include "fedgbdt/eval.hpp"
#include "fedgbdt/federation.hpp"

namespace fedgbdt {

struct PartitionSettings {
  double alpha = 0.3;
};

struct AttackSettings {
  std::string victim = "auto";  // "auto", "global", or a client/chain index
  double time_limit_s = 600.0;
  int top_k = 5;
};

struct EvalSettings {
  double test_fraction = 0.2;
};

// One experiment: partition -> federated train (with optional defense) ->
// attack -> evaluate -> report files.
struct ExperimentSpec {
  std::string dataset_csv;
  std::string schema_path;
  MissingPolicy missing_policy = MissingPolicy::reject;
  PartitionSettings partition;
  FedConfig fed;
  AttackSettings attack;
  EvalSettings eval;
  std::string out_dir;
  std::uint64_t seed = 0;

  void validate() const;
};

ExperimentSpec experiment_from_json(const std::string& text);
ExperimentSpec load_experiment(const std::string& path);

struct SummaryRow {
  std::string protocol;
  int depth = 0;
  int n_trees = 0;
  double epsilon = std::numeric_limits<double>::infinity();  // per histogram
  double ra_all = 0.0;
  double ra_topk = 0.0;
  double ra_phase1 = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
  double wall_clock_s = 0.0;
};

std::string summary_csv_header();
std::string summary_csv_row(const SummaryRow& row);

struct ExperimentResult {
  SummaryRow summary;
  AttackReport attack_report;
  MatchReport match_all;
  MatchReport match_topk;
  MatchReport match_phase1;
  UtilityMetrics utility;
};

// In-memory pipeline pieces, reused by the CLI subcommands.
struct PreparedData {
  FeatureSchema schema;
  Dataset train;
  Dataset test;
  std::vector<Dataset> clients;
};
PreparedData prepare_data(const ExperimentSpec& spec);

// Full pipeline; writes views, models, reports and summary.csv under
// spec.out_dir (training outputs land before the attack stage starts).
ExperimentResult run_experiment(const ExperimentSpec& spec);

// File-based pipeline stages behind the CLI subcommands. `partition` writes
// the client shards, `train` adds models and views, `attack` consumes the
// written views, `evaluate` scores the written reconstruction.
void stage_partition(const ExperimentSpec& spec);
void stage_train(const ExperimentSpec& spec);
void stage_attack(const ExperimentSpec& spec);
SummaryRow stage_evaluate(const ExperimentSpec& spec);

enum class SweepAxis { depth, epsilon, clients };
SweepAxis sweep_axis_from_name(const std::string& name);

struct SweepSpec {
  SweepAxis axis = SweepAxis::depth;
  std::vector<double> values;  // epsilon axis accepts +inf for "no defense"
};
std::optional<SweepSpec> sweep_from_json(const std::string& text);

std::vector<SummaryRow> run_sweep(const ExperimentSpec& base, const SweepSpec& sweep);

}  // namespace fedgbdt
