#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>

#include "fedgbdt/experiment.hpp"
#include "fedgbdt/serialize.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

// One test case per acceptance criterion; each prints a single PASS/FAIL
// line so the suite reads as a checklist.

using namespace fedgbdt;
namespace fs = std::filesystem;

namespace {

void report(int id, const char* name, bool pass) {
  std::printf("[criterion %02d] %-52s %s\n", id, name, pass ? "PASS" : "FAIL");
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path work_dir() {
  auto dir = fs::temp_directory_path() / "fedgbdt_acceptance";
  fs::create_directories(dir);
  return dir;
}

// Shared desk-scale diabetes-style experiment (criteria 4-6): 728 rows,
// 3 clients, alpha 0.3, histogram protocol, 100 trees, depth 6, 60 s/tree.
ExperimentSpec pima_spec(const std::string& tag) {
  static std::string csv_path, schema_path;
  if (csv_path.empty()) {
    auto data = fixtures::synthetic_pima(728, 2026);
    csv_path = (work_dir() / "pima.csv").string();
    schema_path = (work_dir() / "pima_schema.json").string();
    write_text_file(csv_path, to_csv(data));
    write_text_file(schema_path, schema_to_json(data.schema));
  }
  ExperimentSpec spec;
  spec.dataset_csv = csv_path;
  spec.schema_path = schema_path;
  spec.fed.protocol = Protocol::histogram;
  spec.fed.n_clients = 3;
  spec.fed.rounds = 100;
  spec.fed.boost.max_depth = 6;
  spec.fed.seed = 7;
  spec.seed = 7;
  spec.partition.alpha = 0.3;
  spec.attack.victim = "global";
  spec.attack.time_limit_s = 60.0;
  spec.attack.top_k = 5;
  spec.eval.test_fraction = 0.2;
  spec.out_dir = (work_dir() / tag).string();
  return spec;
}

const ExperimentResult& pima_baseline() {
  static ExperimentResult result = run_experiment(pima_spec("pima_baseline"));
  return result;
}

struct DpArm {
  double ra_all = 0.0;
  double f1 = 0.0;
};

// DP arms recompute only what criterion 6 scores (RA over all features, F1).
DpArm run_dp_arm(double epsilon_histogram) {
  ExperimentSpec spec = pima_spec("pima_eps");
  DPConfig dp;
  dp.epsilon_histogram = epsilon_histogram;
  dp.clip_r = 1.0;
  dp.seed = 13;
  spec.fed.defense = dp;

  PreparedData data = prepare_data(spec);
  FedResult fed = run_federated(data.clients, spec.fed);
  AttackOptions opts;
  opts.time_limit_s = spec.attack.time_limit_s;
  AttackReport rep = attack(fed.views.front(), data.clients.front(), opts);
  ToleranceSet tol = tolerances_from(feature_stats(data.train), data.schema);
  DpArm arm;
  arm.ra_all = reconstruction_accuracy(rep.final, data.train, tol).ra;
  arm.f1 = utility_metrics(fed.global, data.test).f1;
  return arm;
}

}  // namespace

TEST_CASE("criterion 1: exact first-tree recovery on randomized fixtures") {
  bool counts_exact = true, labels_exact = true, fast_enough = true;
  int checked = 0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    auto t0 = std::chrono::steady_clock::now();
    std::size_t rows = 20 + (k * 9) % 181;
    std::size_t features = 2 + k % 5;
    int depth = 2 + static_cast<int>(k % 4);
    double base_score = (k % 3 == 0) ? 0.3 : (k % 3 == 1 ? 0.5 : 0.7);

    auto data = fixtures::random_dataset(1000 + k, rows, features);
    BoostParams params;
    params.n_trees = 1;
    params.max_depth = depth;
    params.base_score = base_score;
    Ensemble ens = train_ensemble(data, params);
    const Tree& tree = ens.trees[0];

    auto counts = infer_leaf_counts(tree, base_score);
    auto labels = infer_label_distribution(tree, counts, params.learning_rate, params.lambda,
                                           base_score);
    auto truth = oracles::route_truth(tree, data);
    REQUIRE(counts.size() == truth.size());
    for (std::size_t j = 0; j < counts.size(); ++j) {
      counts_exact &= counts[j].n == truth[j].n && counts[j].residual < 1e-6;
      labels_exact &= labels[j].n1 == truth[j].n1 &&
                      labels[j].n0 == truth[j].n - truth[j].n1 && labels[j].residual < 1e-6;
    }
    fast_enough &= seconds_since(t0) < 1.0;
    ++checked;
  }
  bool pass = counts_exact && labels_exact && fast_enough && checked == 20;
  report(1, "exact first-tree recovery (20 random fixtures)", pass);
  CHECK(counts_exact);
  CHECK(labels_exact);
  CHECK(fast_enough);
  CHECK(pass);
}

TEST_CASE("criterion 2: 15-row fixture end-to-end") {
  auto t0 = std::chrono::steady_clock::now();
  auto data = fixtures::fig4_dataset();
  auto params = fixtures::fig4_params();
  Ensemble ens = train_ensemble(data, params);
  const Tree& tree = ens.trees[0];

  auto stats_close = [&](std::size_t row, double p, double g, double h) {
    double margin = predict_margin(ens, data.rows[row]);
    double prob = sigmoid(margin);
    auto [gg, hh] = logloss_grad_hess(clamp_probability(prob), data.labels[row]);
    return std::fabs(prob - p) < 0.005 && std::fabs(gg - g) < 0.005 && std::fabs(hh - h) < 0.005;
  };
  bool stats_ok = stats_close(0, 0.41, 0.41, 0.24) && stats_close(7, 0.57, -0.43, 0.24) &&
                  stats_close(11, 0.46, -0.54, 0.25) && stats_close(12, 0.46, 0.46, 0.25);

  auto counts = infer_leaf_counts(tree, params.base_score);
  auto labels = infer_label_distribution(tree, counts, params.learning_rate, params.lambda,
                                         params.base_score);
  auto recon = init_dataset(tree, counts, labels, data.schema, feature_stats(data), params);

  bool counts_ok = counts.size() == 3 && counts[0].n == 7 && counts[1].n == 4 && counts[2].n == 4;
  bool labels_ok = labels[0].n0 == 7 && labels[0].n1 == 0 && labels[1].n1 == 4 &&
                   labels[2].n0 == 3 && labels[2].n1 == 1;
  bool ranges_ok = recon.samples.size() == 15;
  for (int i = 0; i < 7 && ranges_ok; ++i)
    ranges_ok &= recon.samples[i].box.intervals[0].hi == 60.0 &&
                 std::isinf(recon.samples[i].box.intervals[1].hi);
  for (int i = 7; i < 11 && ranges_ok; ++i)
    ranges_ok &= recon.samples[i].box.intervals[0].lo == 60.0 &&
                 recon.samples[i].box.intervals[1].hi == 29.0;
  for (int i = 11; i < 15 && ranges_ok; ++i)
    ranges_ok &= recon.samples[i].box.intervals[1].lo == 29.0;

  bool fast_enough = seconds_since(t0) < 1.0;
  bool pass = stats_ok && counts_ok && labels_ok && ranges_ok && fast_enough;
  report(2, "15-row fixture end-to-end (stats, counts, ranges)", pass);
  CHECK(stats_ok);
  CHECK(counts_ok);
  CHECK(labels_ok);
  CHECK(ranges_ok);
  CHECK(fast_enough);
}

TEST_CASE("criterion 3: solver oracle equivalence") {
  auto t0 = std::chrono::steady_clock::now();
  Rng rng(31337);
  bool oracle_match = true;
  for (int round = 0; round < 200; ++round) {
    AssignmentProblem p;
    std::size_t m = 2 + rng.below(3);
    std::size_t n = 1 + rng.below(8);
    for (std::size_t j = 0; j < m; ++j) p.leaves.push_back({rng.normal(), rng.uniform() * 2.0});
    for (std::size_t i = 0; i < n; ++i) {
      AssignmentProblem::Sample s;
      s.g = rng.normal();
      s.h = rng.uniform();
      for (std::size_t j = 0; j < m; ++j)
        if (rng.uniform() < 0.7) s.reachable.push_back(static_cast<int>(j));
      if (s.reachable.empty()) s.reachable.push_back(static_cast<int>(rng.below(m)));
      p.samples.push_back(std::move(s));
    }
    auto exact = solve_brute_force(p);
    auto heur = solve(p, 60.0);
    oracle_match &= heur.objective == doctest::Approx(exact.objective).epsilon(1e-12);
  }

  // 50 instances carved out of genuinely trained trees: exact statistics,
  // reachability boxed by the first tree's paths, sized to the enumeration
  // guard so the exact refinement can prove the zero optimum.
  bool zero_objective = true;
  int solved = 0;
  for (std::uint64_t seed = 0; solved < 50 && seed < 400; ++seed) {
    auto p = fixtures::attack_style_instance(seed, 16 + (seed % 5) * 4, 2 + seed % 3);
    if (!p) continue;
    auto solution = solve(*p, 60.0);
    zero_objective &= solution.objective < 1e-9 && solution.status == SolveStatus::optimal;
    ++solved;
  }
  zero_objective &= solved == 50;
  bool fast_enough = seconds_since(t0) < 60.0;
  bool pass = oracle_match && zero_objective && fast_enough;
  report(3, "solver oracle equivalence (200 + 50 instances)", pass);
  CHECK(oracle_match);
  CHECK(zero_objective);
  CHECK(fast_enough);
}

TEST_CASE("criterion 4: desk-scale diabetes reconstruction bands") {
  const auto& result = pima_baseline();
  bool ra_all_ok = result.summary.ra_all >= 0.60;
  bool ra_topk_ok = result.summary.ra_topk >= 0.75;
  bool pass = ra_all_ok && ra_topk_ok;
  report(4, "histogram RA bands (all >= 0.60, top-5 >= 0.75)", pass);
  CAPTURE(result.summary.ra_all);
  CAPTURE(result.summary.ra_topk);
  CHECK(ra_all_ok);
  CHECK(ra_topk_ok);
}

TEST_CASE("criterion 5: refinement phase does not lose accuracy") {
  const auto& result = pima_baseline();
  bool pass = result.summary.ra_all >= result.summary.ra_phase1 - 0.01;
  report(5, "RA(final) >= RA(phase 1) - 0.01", pass);
  CAPTURE(result.summary.ra_phase1);
  CAPTURE(result.summary.ra_all);
  CHECK(pass);
}

TEST_CASE("criterion 6: privacy noise degrades the attack and the model") {
  const auto& baseline = pima_baseline();
  DpArm eps1 = run_dp_arm(1.0);
  DpArm eps0125 = run_dp_arm(0.125);

  const double band = 0.03;
  bool monotone = baseline.summary.ra_all + band >= eps1.ra_all &&
                  eps1.ra_all + band >= eps0125.ra_all;
  bool floor_ok = eps0125.ra_all > 0.40;
  bool utility_drops = baseline.summary.f1 - eps0125.f1 >= 0.05;
  bool pass = monotone && floor_ok && utility_drops;
  report(6, "DP trend (monotone RA, RA floor, F1 drop)", pass);
  CAPTURE(baseline.summary.ra_all);
  CAPTURE(eps1.ra_all);
  CAPTURE(eps0125.ra_all);
  CAPTURE(baseline.summary.f1);
  CAPTURE(eps0125.f1);
  CHECK(monotone);
  CHECK(floor_ok);
  CHECK(utility_drops);
}

TEST_CASE("criterion 7: hardened protocol blocks the attack, splits preserved") {
  auto data = fixtures::synthetic_pima(400, 99);
  auto clients = dirichlet_partition(data, 3, 0.5, 3);
  FedConfig cfg;
  cfg.protocol = Protocol::hardened_histogram;
  cfg.n_clients = 3;
  cfg.rounds = 10;
  cfg.boost.max_depth = 4;
  cfg.seed = 17;
  auto hardened = run_histogram(clients, cfg);

  bool blocked = false;
  std::string message;
  try {
    AttackOptions opts;
    attack(hardened.views[0], clients[0], opts);
  } catch (const StatisticsWithheldError& e) {
    blocked = true;
    message = e.what();
  }
  bool message_ok = message == "statistics withheld";

  cfg.protocol = Protocol::histogram;
  auto open = run_histogram(clients, cfg);
  bool splits_equal = hardened.global.trees.size() == open.global.trees.size();
  for (std::size_t t = 0; splits_equal && t < open.global.trees.size(); ++t) {
    const auto& a = hardened.global.trees[t].nodes;
    const auto& b = open.global.trees[t].nodes;
    splits_equal &= a.size() == b.size();
    for (std::size_t n = 0; splits_equal && n < a.size(); ++n)
      splits_equal &= a[n].is_leaf == b[n].is_leaf && a[n].feature == b[n].feature &&
                      a[n].threshold == b[n].threshold && a[n].leaf_value == b[n].leaf_value;
  }
  bool pass = blocked && message_ok && splits_equal;
  report(7, "hardened protocol blocks attack, model unchanged", pass);
  CHECK(blocked);
  CHECK(message_ok);
  CHECK(splits_equal);
}

TEST_CASE("criterion 8: global reconstruction is flat in the client count") {
  auto data = fixtures::synthetic_stroke(5000, 55);
  std::vector<double> ras;
  for (int n_clients : {3, 10, 30}) {
    auto clients = dirichlet_partition(data, n_clients, 0.3, 23);
    FedConfig cfg;
    cfg.protocol = Protocol::histogram;
    cfg.n_clients = n_clients;
    cfg.rounds = 20;
    cfg.boost.max_depth = 4;
    cfg.seed = 29;
    auto fed = run_histogram(clients, cfg);
    AttackOptions opts;
    opts.time_limit_s = 5.0;
    AttackReport rep = attack(fed.views.front(), clients.front(), opts);
    ToleranceSet tol = tolerances_from(feature_stats(data), data.schema);
    ras.push_back(reconstruction_accuracy(rep.final, data, tol).ra);
  }
  double spread = *std::max_element(ras.begin(), ras.end()) -
                  *std::min_element(ras.begin(), ras.end());
  bool pass = spread <= 0.05;
  report(8, "client-count scaling spread <= 0.05", pass);
  CAPTURE(ras[0]);
  CAPTURE(ras[1]);
  CAPTURE(ras[2]);
  CHECK(pass);
}

TEST_CASE("criterion 9: metric fidelity") {
  // Worked four-sample example with per-pair scores 1.0 / 0.6 / 1.0 / 0.8.
  FeatureSchema schema;
  for (int f = 0; f < 4; ++f)
    schema.features.push_back({"c" + std::to_string(f),
                               FeatureKind::categorical,
                               {"a", "b", "c", "d", "e", "f", "g", "h"}});
  schema.label = {"y", 2};
  ToleranceSet tol{std::vector<double>(4, 0.0)};
  Dataset original;
  original.schema = schema;
  original.rows = {{0, 0, 0, 0}, {1, 1, 1, 1}, {2, 2, 2, 2}, {3, 3, 3, 3}};
  original.labels = {0, 1, 0, 1};
  ReconstructedDataset recon;
  recon.schema = schema;
  auto point = [&](std::vector<double> row, int label) {
    ReconstructedSample s;
    s.box = FeatureBox::unconstrained(schema);
    for (std::size_t f = 0; f < 4; ++f)
      s.box.cat_candidates[f] = {static_cast<int>(row[f])};
    s.label = label;
    recon.samples.push_back(std::move(s));
  };
  point({0, 0, 0, 0}, 0);
  point({1, 1, 7, 7}, 1);
  point({2, 2, 2, 2}, 0);
  point({3, 3, 3, 7}, 1);
  auto rep = reconstruction_accuracy(recon, original, tol);
  bool worked_example = std::fabs(rep.ra - 0.85) < 1e-12;

  Rng rng(616);
  bool matching_exact = true;
  for (int round = 0; round < 100; ++round) {
    std::size_t n = 2 + rng.below(5);
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (auto& row : cost)
      for (auto& v : row) v = rng.uniform();
    auto assignment = hungarian(cost);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost[i][assignment[i]];
    auto [_, best] = oracles::factorial_matching(cost);
    matching_exact &= std::fabs(total - best) < 1e-9;
  }
  bool pass = worked_example && matching_exact;
  report(9, "RA worked example = 0.85, matching vs factorial", pass);
  CHECK(worked_example);
  CHECK(matching_exact);
}

TEST_CASE("criterion 10: bagging chain identification across seeds") {
  std::size_t correct = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto clients = fixtures::separated_clients({60, 130, 260}, 700 + seed);
    FedConfig cfg;
    cfg.protocol = Protocol::bagging;
    cfg.n_clients = 3;
    cfg.rounds = 30;
    cfg.boost.max_depth = 3;
    cfg.seed = 900 + seed;
    auto fed = run_bagging(clients, cfg);
    auto chains = identify_tree_chains(fed.views[0], 3);

    // score the grouping under the best chain-to-client bijection
    std::vector<std::vector<int>> agree(3, std::vector<int>(3, 0));
    for (int chain = 0; chain < 3; ++chain)
      for (int t : chains.chains[chain]) ++agree[chain][fed.global.trees[t].client_id];
    std::vector<int> perm{0, 1, 2};
    int best = 0;
    do {
      int score = agree[0][perm[0]] + agree[1][perm[1]] + agree[2][perm[2]];
      best = std::max(best, score);
    } while (std::next_permutation(perm.begin(), perm.end()));
    correct += static_cast<std::size_t>(best);
    total += fed.global.trees.size();
  }
  double accuracy = static_cast<double>(correct) / static_cast<double>(total);
  bool pass = accuracy >= 0.95;
  report(10, "chain identification accuracy >= 95% over 10 seeds", pass);
  CAPTURE(accuracy);
  CHECK(pass);
}
