#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedgbdt/tabular.hpp"

namespace fedgbdt {

struct BoostParams {
  int n_trees = 100;
  int max_depth = 6;
  double learning_rate = 0.3;
  double lambda = 1.0;        // L2 on leaf weights
  double gamma = 0.0;         // minimum split gain
  double base_score = 0.5;    // probability for binary, logit for multiclass
  int n_bins = 32;
  double min_child_hessian = 0.0;

  void validate() const;
};

// Sums of per-sample gradients and Hessians over the samples routed to a node.
struct NodeStats {
  double grad_sum = 0.0;
  double hess_sum = 0.0;
};

struct TreeNode {
  bool is_leaf = true;
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double leaf_value = 0.0;               // learning rate pre-applied
  std::optional<NodeStats> stats;        // nullopt = withheld (hardened protocol)
};

// Routing rule: feature value < threshold goes left, else right. Shared
// bit-exactly with the reconstruction side.
struct Tree {
  std::vector<TreeNode> nodes;  // root at index 0, breadth-first ids
  // provenance (set by the federation runners)
  int client_id = -1;
  int round = -1;
  int class_index = -1;  // -1 for binary

  int route(std::span<const double> row) const;
  double value(std::span<const double> row) const;
  std::vector<int> leaf_ids() const;
  bool stats_present() const;
  Tree without_stats() const;
};

struct Ensemble {
  std::vector<Tree> trees;
  BoostParams params;
  int n_classes = 2;

  bool multiclass() const { return n_classes > 2; }
};

struct BinStats {
  double grad_sum = 0.0;
  double hess_sum = 0.0;
  std::size_t count = 0;
};

// Per-feature binned (G, H) accumulation. For feature f with edges
// e_0 < ... < e_{k-1}, bin 0 covers (-inf, e_0) and bin j covers
// [e_{j-1}, e_j); splitting at e_j sends bins 0..j left.
struct Histogram {
  std::vector<std::vector<double>> edges;   // per feature, strictly increasing
  std::vector<std::vector<BinStats>> bins;  // per feature, size edges[f].size() + 1

  void add(const Histogram& other);  // bin-wise sum; edges must match
  NodeStats feature_total(std::size_t feature) const;
};

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
  NodeStats left;
  NodeStats right;
};

double sigmoid(double x);
double logit(double p);
// Probabilities are clamped to [1e-9, 1-1e-9] before loss derivatives.
double clamp_probability(double p);

// Log-loss derivatives: g = p - y, h = p(1-p).
std::pair<double, double> logloss_grad_hess(double p, int y);
// Softmax derivatives with the doubled Hessian: g = p_c - [y=c], h = 2 p_c (1-p_c).
std::pair<double, double> softmax_grad_hess(double p_c, int y_is_c);

// Split gain of Eq-style regularized boosting:
// 1/2 (GL^2/(HL+l) + GR^2/(HR+l) - (GL+GR)^2/(HL+HR+l)) - g.
double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma);

// Per-feature quantile cut points over the selected rows, deduplicated,
// at most n_bins - 1 edges per feature.
std::vector<std::vector<double>> quantile_edges(const Dataset& data,
                                                std::span<const std::size_t> indices,
                                                int n_bins);

Histogram build_histogram(const Dataset& data, std::span<const std::size_t> indices,
                          std::span<const double> g, std::span<const double> h,
                          const std::vector<std::vector<double>>& edges);

// Best (feature, edge) candidate maximizing split_gain, both children's
// Hessians >= min_child_hessian; none when the maximum gain <= 0.
// Ties break toward the lowest feature index, then the lowest threshold.
std::optional<SplitCandidate> best_split(const Histogram& hist, double lambda, double gamma,
                                         double min_child_hessian);

// g and h are indexed by dataset row id; indices names the rows of this tree.
Tree train_tree(const Dataset& data, std::span<const std::size_t> indices,
                std::span<const double> g, std::span<const double> h, const BoostParams& params,
                const std::vector<std::vector<double>>& edges);

Ensemble train_ensemble(const Dataset& data, const BoostParams& params);

// Margin before the link function: logit(base_score) plus reached leaf values
// for binary; per-class base_score plus class-tree leaf values for multiclass.
double predict_margin(const Ensemble& ens, std::span<const double> row);
std::vector<double> predict_margins(const Ensemble& ens, std::span<const double> row);
double predict_proba(const Ensemble& ens, std::span<const double> row);
std::vector<double> predict_probas(const Ensemble& ens, std::span<const double> row);

std::vector<double> softmax(std::span<const double> logits);

}  // namespace fedgbdt
