#include "fedgbdt/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "fedgbdt/errors.hpp"
#include "fedgbdt/rng.hpp"
#include "fedgbdt/serialize.hpp"

namespace fedgbdt {

namespace fs = std::filesystem;
using nlohmann::json;

void ExperimentSpec::validate() const {
  if (dataset_csv.empty()) throw ConfigError("experiment: dataset path missing");
  if (schema_path.empty()) throw ConfigError("experiment: schema path missing");
  if (out_dir.empty()) throw ConfigError("experiment: output directory missing");
  if (partition.alpha <= 0.0) throw ConfigError("experiment: partition.alpha must be positive");
  if (eval.test_fraction < 0.0 || eval.test_fraction >= 1.0)
    throw ConfigError("experiment: eval.test_fraction must be in [0,1)");
  if (attack.top_k < 1) throw ConfigError("experiment: attack.top_k must be >= 1");
  if (attack.time_limit_s < 0.0) throw ConfigError("experiment: attack.time_limit_s must be >= 0");
  fed.validate();
  const bool histogram_like =
      fed.protocol == Protocol::histogram || fed.protocol == Protocol::hardened_histogram;
  if (histogram_like) {
    if (attack.victim != "auto" && attack.victim != "global")
      throw ConfigError("experiment: histogram protocols reconstruct the global dataset only");
  } else if (attack.victim == "global") {
    throw ConfigError("experiment: victim 'global' requires a histogram protocol");
  }
}

ExperimentSpec experiment_from_json(const std::string& text) {
  try {
    json j = json::parse(text);
    ExperimentSpec spec;
    spec.dataset_csv = j.at("dataset").get<std::string>();
    spec.schema_path = j.at("schema").get<std::string>();
    if (j.contains("missing_policy")) {
      std::string p = j.at("missing_policy").get<std::string>();
      if (p == "reject")
        spec.missing_policy = MissingPolicy::reject;
      else if (p == "median_impute")
        spec.missing_policy = MissingPolicy::median_impute;
      else
        throw ConfigError("experiment: unknown missing_policy '" + p + "'");
    }
    spec.seed = j.value("seed", 0ull);
    if (j.contains("partition")) spec.partition.alpha = j.at("partition").value("alpha", 0.3);
    {
      json fed = j.at("fed");
      if (!fed.contains("seed")) fed["seed"] = spec.seed;
      spec.fed = fed_config_from_json(fed.dump());
    }
    if (j.contains("attack")) {
      const json& a = j.at("attack");
      if (a.contains("victim"))
        spec.attack.victim = a.at("victim").is_string()
                                 ? a.at("victim").get<std::string>()
                                 : std::to_string(a.at("victim").get<int>());
      spec.attack.time_limit_s = a.value("time_limit_s", 600.0);
      spec.attack.top_k = a.value("top_k", 5);
    }
    if (j.contains("eval")) spec.eval.test_fraction = j.at("eval").value("test_fraction", 0.2);
    spec.out_dir = j.value("out", "out");
    return spec;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment: malformed config: ") + e.what());
  }
}

ExperimentSpec load_experiment(const std::string& path) {
  return experiment_from_json(read_text_file(path));
}

PreparedData prepare_data(const ExperimentSpec& spec) {
  spec.validate();
  PreparedData out;
  out.schema = schema_from_json(read_text_file(spec.schema_path));
  Dataset full = load_csv(spec.dataset_csv, out.schema, spec.missing_policy);

  std::vector<std::size_t> order(full.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::substream(spec.seed, {kStreamTestSplit});
  rng.shuffle(order);
  auto n_test =
      static_cast<std::size_t>(spec.eval.test_fraction * static_cast<double>(full.size()));
  std::vector<std::size_t> test_idx(order.begin(), order.begin() + n_test);
  std::vector<std::size_t> train_idx(order.begin() + n_test, order.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  out.test = n_test > 0 ? full.take(test_idx) : full;
  out.train = full.take(train_idx);
  out.clients = dirichlet_partition(out.train, spec.fed.n_clients, spec.partition.alpha, spec.seed);
  return out;
}

std::string summary_csv_header() {
  return "protocol,depth,n_trees,epsilon,RA_all,RA_topk,RA_phase1,F1,AUC,wall_clock\n";
}

std::string summary_csv_row(const SummaryRow& row) {
  std::ostringstream out;
  out << row.protocol << ',' << row.depth << ',' << row.n_trees << ',';
  if (std::isinf(row.epsilon))
    out << "inf";
  else
    out << row.epsilon;
  out << ',' << row.ra_all << ',' << row.ra_topk << ',' << row.ra_phase1 << ',' << row.f1 << ','
      << row.auc << ',' << row.wall_clock_s << '\n';
  return out.str();
}

namespace {

std::optional<int> resolve_victim(const ExperimentSpec& spec) {
  const bool histogram_like =
      spec.fed.protocol == Protocol::histogram || spec.fed.protocol == Protocol::hardened_histogram;
  if (histogram_like) return std::nullopt;
  if (spec.attack.victim == "auto") return 1;  // first client other than the adversary (0)
  return std::stoi(spec.attack.victim);
}

struct TrainedState {
  PreparedData data;
  FedResult fed_result;
  Ensemble centralized;  // importance reference for top-k evaluation
};

TrainedState do_train(const ExperimentSpec& spec) {
  TrainedState st;
  st.data = prepare_data(spec);
  try {
    st.fed_result = run_federated(st.data.clients, spec.fed);
    BoostParams central = spec.fed.boost;
    central.n_trees = spec.fed.rounds;  // same boosting budget
    st.centralized = train_ensemble(st.data.train, central);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw TrainError(e.what());
  }
  return st;
}

void write_partition_files(const ExperimentSpec& spec, const PreparedData& data) {
  fs::create_directories(spec.out_dir + "/clients");
  write_text_file(spec.out_dir + "/train.csv", to_csv(data.train));
  write_text_file(spec.out_dir + "/test.csv", to_csv(data.test));
  for (std::size_t c = 0; c < data.clients.size(); ++c)
    write_text_file(spec.out_dir + "/clients/client_" + std::to_string(c) + ".csv",
                    to_csv(data.clients[c]));
}

void write_training_files(const ExperimentSpec& spec, const TrainedState& st) {
  write_partition_files(spec, st.data);
  fs::create_directories(spec.out_dir + "/views");
  write_text_file(spec.out_dir + "/global_model.json", ensemble_to_json(st.fed_result.global));
  write_text_file(spec.out_dir + "/centralized_model.json", ensemble_to_json(st.centralized));
  for (const auto& view : st.fed_result.views)
    write_text_file(spec.out_dir + "/views/client_" + std::to_string(view.observer) + ".json",
                    view_to_json(view));
  if (!st.fed_result.tree_weights.empty())
    write_text_file(spec.out_dir + "/tree_weights.json",
                    json{{"weights", st.fed_result.tree_weights}}.dump(2));
}

AttackReport do_attack(const ExperimentSpec& spec, const ClientView& view,
                       const Dataset& adversary_data) {
  AttackOptions opts;
  opts.time_limit_s = spec.attack.time_limit_s;
  opts.victim = resolve_victim(spec);
  AttackReport report = attack(view, adversary_data, opts);
  fs::create_directories(spec.out_dir);
  write_text_file(spec.out_dir + "/attack_report.json", attack_report_to_json(report));
  write_text_file(spec.out_dir + "/recon_final.csv", recon_to_midpoint_csv(report.final));
  write_text_file(spec.out_dir + "/recon_final.ranges.json", recon_ranges_to_json(report.final));
  write_text_file(spec.out_dir + "/recon_phase1.csv", recon_to_midpoint_csv(report.phase1));
  return report;
}

// Ground truth the reconstruction is compared against: the union dataset for
// histogram protocols, the victim's shard otherwise. A bagging victim chain
// is attributed to a client by majority provenance (evaluator-side knowledge;
// the attacker itself cannot attribute chains).
Dataset ground_truth(const ExperimentSpec& spec, const std::vector<Dataset>& clients,
                     const Dataset& train, const Ensemble& global, const ClientView& view,
                     std::optional<int> victim) {
  switch (spec.fed.protocol) {
    case Protocol::histogram:
    case Protocol::hardened_histogram: return train;
    case Protocol::cyclic:
    case Protocol::fedxgbllr: return clients.at(*victim);
    case Protocol::bagging: {
      auto chains = identify_tree_chains(view, spec.fed.n_clients);
      std::vector<int> votes(spec.fed.n_clients, 0);
      for (int t : chains.chains.at(*victim)) {
        int author = global.trees[t].client_id;
        if (author >= 0) ++votes[author];
      }
      int winner = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
      return clients.at(winner);
    }
  }
  throw ConfigError("unknown protocol");
}

// FedXGBllr predicts through the weighted leaf-output model; the fitted
// per-tree weights scale each tree's contribution.
UtilityMetrics fedxgbllr_utility(const Ensemble& global, const std::vector<double>& weights,
                                 const Dataset& test) {
  Ensemble weighted = global;
  for (std::size_t t = 0; t < weighted.trees.size(); ++t)
    for (auto& n : weighted.trees[t].nodes)
      if (n.is_leaf) n.leaf_value *= weights[t];
  return utility_metrics(weighted, test);
}

struct Evaluation {
  MatchReport match_all, match_topk, match_phase1;
  UtilityMetrics utility;
};

Evaluation do_evaluate(const ExperimentSpec& spec, const AttackReport& report,
                       const Dataset& truth, const Dataset& test, const Ensemble& centralized,
                       const Ensemble& global, const std::vector<double>& tree_weights) {
  Evaluation ev;
  try {
    ToleranceSet tol = tolerances_from(feature_stats(truth), truth.schema);
    ev.match_all = reconstruction_accuracy(report.final, truth, tol);
    ev.match_phase1 = reconstruction_accuracy(report.phase1, truth, tol);
    ev.match_topk =
        top_k_feature_ra(report.final, truth, tol, centralized, spec.attack.top_k);
    ev.utility = spec.fed.protocol == Protocol::fedxgbllr
                     ? fedxgbllr_utility(global, tree_weights, test)
                     : utility_metrics(global, test);
  } catch (const EvalError&) {
    throw;
  } catch (const std::exception& e) {
    throw EvalError(e.what());
  }
  write_text_file(spec.out_dir + "/match_report.json", match_report_to_json(ev.match_all));
  write_text_file(spec.out_dir + "/match_report_topk.json", match_report_to_json(ev.match_topk));
  write_text_file(spec.out_dir + "/match_report_phase1.json",
                  match_report_to_json(ev.match_phase1));
  return ev;
}

SummaryRow make_summary(const ExperimentSpec& spec, int n_trees, const Evaluation& ev,
                        double wall_clock_s) {
  SummaryRow row;
  row.protocol = protocol_name(spec.fed.protocol);
  row.depth = spec.fed.boost.max_depth;
  row.n_trees = n_trees;
  row.epsilon = spec.fed.defense ? spec.fed.defense->resolve_epsilon(n_trees)
                                 : std::numeric_limits<double>::infinity();
  row.ra_all = ev.match_all.ra;
  row.ra_topk = ev.match_topk.ra;
  row.ra_phase1 = ev.match_phase1.ra;
  row.f1 = ev.utility.f1;
  row.auc = ev.utility.auc;
  row.wall_clock_s = wall_clock_s;
  return row;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainedState st = do_train(spec);
  write_training_files(spec, st);

  AttackReport report = do_attack(spec, st.fed_result.views.front(), st.data.clients.front());

  std::optional<int> victim = resolve_victim(spec);
  Dataset truth = ground_truth(spec, st.data.clients, st.data.train, st.fed_result.global,
                               st.fed_result.views.front(), victim);
  Evaluation ev = do_evaluate(spec, report, truth, st.data.test, st.centralized,
                              st.fed_result.global, st.fed_result.tree_weights);

  ExperimentResult result;
  result.attack_report = std::move(report);
  result.match_all = ev.match_all;
  result.match_topk = ev.match_topk;
  result.match_phase1 = ev.match_phase1;
  result.utility = ev.utility;
  result.summary = make_summary(
      spec, static_cast<int>(st.fed_result.global.trees.size()), ev,
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  write_text_file(spec.out_dir + "/summary.csv",
                  summary_csv_header() + summary_csv_row(result.summary));
  return result;
}

void stage_partition(const ExperimentSpec& spec) {
  write_partition_files(spec, prepare_data(spec));
}

void stage_train(const ExperimentSpec& spec) { write_training_files(spec, do_train(spec)); }

void stage_attack(const ExperimentSpec& spec) {
  spec.validate();
  FeatureSchema schema = schema_from_json(read_text_file(spec.schema_path));
  ClientView view = view_from_json(read_text_file(spec.out_dir + "/views/client_0.json"));
  Dataset adversary = load_csv(spec.out_dir + "/clients/client_0.csv", schema);
  do_attack(spec, view, adversary);
}

SummaryRow stage_evaluate(const ExperimentSpec& spec) {
  spec.validate();
  FeatureSchema schema = schema_from_json(read_text_file(spec.schema_path));
  AttackReport report =
      attack_report_from_json(read_text_file(spec.out_dir + "/attack_report.json"), schema);
  Ensemble global = ensemble_from_json(read_text_file(spec.out_dir + "/global_model.json"));
  Ensemble centralized =
      ensemble_from_json(read_text_file(spec.out_dir + "/centralized_model.json"));
  ClientView view = view_from_json(read_text_file(spec.out_dir + "/views/client_0.json"));
  Dataset train = load_csv(spec.out_dir + "/train.csv", schema);
  Dataset test = load_csv(spec.out_dir + "/test.csv", schema);
  std::vector<Dataset> clients;
  for (int c = 0; c < spec.fed.n_clients; ++c)
    clients.push_back(
        load_csv(spec.out_dir + "/clients/client_" + std::to_string(c) + ".csv", schema));
  std::vector<double> weights;
  if (spec.fed.protocol == Protocol::fedxgbllr)
    weights = json::parse(read_text_file(spec.out_dir + "/tree_weights.json"))
                  .at("weights")
                  .get<std::vector<double>>();

  std::optional<int> victim = resolve_victim(spec);
  Dataset truth = ground_truth(spec, clients, train, global, view, victim);
  Evaluation ev = do_evaluate(spec, report, truth, test, centralized, global, weights);
  SummaryRow row = make_summary(spec, static_cast<int>(global.trees.size()), ev,
                                report.wall_clock_s);
  write_text_file(spec.out_dir + "/summary.csv", summary_csv_header() + summary_csv_row(row));
  return row;
}

SweepAxis sweep_axis_from_name(const std::string& name) {
  if (name == "depth") return SweepAxis::depth;
  if (name == "epsilon") return SweepAxis::epsilon;
  if (name == "clients" || name == "n_clients") return SweepAxis::clients;
  throw ConfigError("sweep: unknown axis '" + name + "'");
}

std::optional<SweepSpec> sweep_from_json(const std::string& text) {
  try {
    json j = json::parse(text);
    if (!j.contains("sweep")) return std::nullopt;
    const json& s = j.at("sweep");
    SweepSpec spec;
    spec.axis = sweep_axis_from_name(s.at("axis").get<std::string>());
    for (const auto& v : s.at("values")) {
      if (v.is_string()) {
        std::string sv = v.get<std::string>();
        if (sv == "inf" || sv == "none")
          spec.values.push_back(std::numeric_limits<double>::infinity());
        else
          spec.values.push_back(std::stod(sv));
      } else if (v.is_null()) {
        spec.values.push_back(std::numeric_limits<double>::infinity());
      } else {
        spec.values.push_back(v.get<double>());
      }
    }
    if (spec.values.empty()) throw ConfigError("sweep: empty value list");
    return spec;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sweep: malformed config: ") + e.what());
  }
}

std::vector<SummaryRow> run_sweep(const ExperimentSpec& base, const SweepSpec& sweep) {
  std::vector<SummaryRow> rows;
  std::string csv = summary_csv_header();
  for (double value : sweep.values) {
    ExperimentSpec spec = base;
    std::ostringstream label;
    switch (sweep.axis) {
      case SweepAxis::depth:
        spec.fed.boost.max_depth = static_cast<int>(value);
        label << "depth_" << static_cast<int>(value);
        break;
      case SweepAxis::epsilon:
        if (std::isinf(value)) {
          spec.fed.defense.reset();
          label << "epsilon_inf";
        } else {
          DPConfig dp = spec.fed.defense.value_or(DPConfig{});
          dp.epsilon_total.reset();
          dp.epsilon_histogram = value;
          if (!spec.fed.defense) dp.seed = spec.fed.seed;
          spec.fed.defense = dp;
          label << "epsilon_" << value;
        }
        break;
      case SweepAxis::clients:
        spec.fed.n_clients = static_cast<int>(value);
        label << "clients_" << static_cast<int>(value);
        break;
    }
    spec.out_dir = base.out_dir + "/" + label.str();
    rows.push_back(run_experiment(spec).summary);
    csv += summary_csv_row(rows.back());
  }
  fs::create_directories(base.out_dir);
  write_text_file(base.out_dir + "/sweep.csv", csv);
  return rows;
}

}  // namespace fedgbdt
