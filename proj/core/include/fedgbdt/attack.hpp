#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedgbdt/assign_opt.hpp"
#include "fedgbdt/federation.hpp"
#include "fedgbdt/recon.hpp"

namespace fedgbdt {

// --- First-Tree Probing -----------------------------------------------------

struct LeafCount {
  int leaf_id = -1;
  long long n = 0;
  double residual = 0.0;  // |rounded - raw|
};

struct LeafLabelSplit {
  int leaf_id = -1;
  long long n0 = 0;
  long long n1 = 0;
  double residual = 0.0;
};

// N_j = round(H_j / (b (1 - b))); requires node statistics and b in (0,1).
std::vector<LeafCount> infer_leaf_counts(const Tree& first_tree, double base_score);

// Inverts the leaf formula G_j = -leaf_value_j / eta * (H_j + lambda), then
// N1_j = round(N_j b - G_j) clamped to [0, N_j].
std::vector<LeafLabelSplit> infer_label_distribution(const Tree& first_tree,
                                                     const std::vector<LeafCount>& counts,
                                                     double eta, double lambda,
                                                     double base_score);

// Multiclass probing at uniform initial probability 1/K with the doubled
// softmax Hessian: N_j = round(H_j / (2 p (1-p))), N^c_j = round(N_j / K - G_j).
std::vector<LeafCount> infer_leaf_counts_softmax(const Tree& first_tree, int n_classes);
std::vector<LeafCount> infer_class_counts(const Tree& class_tree,
                                          const std::vector<LeafCount>& counts, double eta,
                                          double lambda, int n_classes);

// --- Boxes and tree geometry -------------------------------------------------

// Conjunction of the split predicates on the root-to-leaf path.
FeatureBox leaf_path_box(const Tree& tree, int leaf_id, const FeatureSchema& schema);

// All leaves whose path predicates intersect the box; never empty for a
// well-formed box.
std::vector<int> reachable_leaves(const FeatureBox& box, const Tree& tree,
                                  const FeatureSchema& schema);

ReconstructedDataset init_dataset(const Tree& first_tree, const std::vector<LeafCount>& counts,
                                  const std::vector<LeafLabelSplit>& labels,
                                  const FeatureSchema& schema, const FeatureStats& global_bounds,
                                  const BoostParams& params);

// Refreshes every sample's (p, g, h) from its accumulated leaf values.
void update_sample_stats(ReconstructedDataset& recon, int n_classes);

// Hessian-weighted mean leaf value over the sample's reachable leaves of a
// tree not authored by the victim; unweighted mean when the Hessians sum to 0.
double surrogate_foreign_leaf(const ReconstructedSample& sample, const Tree& foreign_tree,
                              const FeatureSchema& schema);

// --- Feature Range Inference -------------------------------------------------

enum class TreeSolveStatus { optimal, time_limited, infeasible_relaxed };
std::string tree_solve_status_name(TreeSolveStatus s);

struct PerTreeRecord {
  int tree_index = -1;
  TreeSolveStatus status = TreeSolveStatus::optimal;
  double objective = 0.0;
  double wall_clock_s = 0.0;
};

// Solves the per-tree assignment problem, shrinks boxes to the assigned
// leaves' path conjunctions, and accumulates the assigned leaf values.
// class_slot selects the per-class statistics (0 for binary).
PerTreeRecord feature_range_inference(ReconstructedDataset& recon, const Tree& tree,
                                      int class_slot, double time_limit_s, int tree_index);

// --- Bagging chain identification ---------------------------------------------

struct ChainResult {
  std::vector<std::vector<int>> chains;  // per chain, ordered tree indices
  bool ambiguous = false;                // distance ties made the grouping arbitrary
};

// Greedy per-round matching of trees to chains by root-Hessian distance
// (full per-node Hessian vectors as tie-breaker), one tree per chain per
// round via minimum-cost matching.
ChainResult identify_tree_chains(const ClientView& view, int n_clients);

// --- Orchestration -------------------------------------------------------------

struct AttackOptions {
  // Per-tree optimizer budget, matching the evaluation protocol default.
  double time_limit_s = 600.0;
  // Client id (cyclic, fedxgbllr), chain index (bagging); unused for the
  // histogram protocols, which reconstruct the global dataset.
  std::optional<int> victim;
};

struct AttackReport {
  ReconstructedDataset phase1;
  ReconstructedDataset final;
  std::vector<PerTreeRecord> per_tree;
  double wall_clock_s = 0.0;
  bool chain_ambiguous = false;
};

// Runs First-Tree Probing and Feature Range Inference against a client view.
// adversary_data supplies the attacker's schema and own-data feature bounds.
AttackReport attack(const ClientView& view, const Dataset& adversary_data,
                    const AttackOptions& opts);

}  // namespace fedgbdt
