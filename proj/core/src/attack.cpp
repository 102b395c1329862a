#include "fedgbdt/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

#include "fedgbdt/errors.hpp"
#include "fedgbdt/eval.hpp"

namespace fedgbdt {

// --- FeatureBox ---------------------------------------------------------------

FeatureBox FeatureBox::unconstrained(const FeatureSchema& schema) {
  FeatureBox box;
  box.intervals.resize(schema.n_features());
  box.cat_candidates.resize(schema.n_features());
  for (std::size_t f = 0; f < schema.n_features(); ++f) {
    if (schema.features[f].kind == FeatureKind::categorical) {
      auto& cands = box.cat_candidates[f];
      cands.resize(schema.features[f].categories.size());
      std::iota(cands.begin(), cands.end(), 0);
    }
  }
  return box;
}

bool FeatureBox::restrict(const FeatureSchema& schema, int feature, double threshold,
                          bool left_branch) {
  if (schema.features[feature].kind == FeatureKind::numerical) {
    auto& iv = intervals[feature];
    if (left_branch)
      iv.hi = std::min(iv.hi, threshold);
    else
      iv.lo = std::max(iv.lo, threshold);
    return iv.lo < iv.hi;
  }
  auto& cands = cat_candidates[feature];
  std::vector<int> kept;
  for (int c : cands)
    if (left_branch ? c < threshold : c >= threshold) kept.push_back(c);
  cands = std::move(kept);
  return !cands.empty();
}

bool FeatureBox::intersect(const FeatureSchema& schema, const FeatureBox& other) {
  bool ok = true;
  for (std::size_t f = 0; f < schema.n_features(); ++f) {
    if (schema.features[f].kind == FeatureKind::numerical) {
      auto& iv = intervals[f];
      iv.lo = std::max(iv.lo, other.intervals[f].lo);
      iv.hi = std::min(iv.hi, other.intervals[f].hi);
      ok &= iv.lo < iv.hi;
    } else {
      std::vector<int> kept;
      std::set_intersection(cat_candidates[f].begin(), cat_candidates[f].end(),
                            other.cat_candidates[f].begin(), other.cat_candidates[f].end(),
                            std::back_inserter(kept));
      cat_candidates[f] = std::move(kept);
      ok &= !cat_candidates[f].empty();
    }
  }
  return ok;
}

bool FeatureBox::contains(const FeatureSchema& schema, const std::vector<double>& row) const {
  for (std::size_t f = 0; f < schema.n_features(); ++f) {
    if (schema.features[f].kind == FeatureKind::numerical) {
      if (row[f] < intervals[f].lo || row[f] >= intervals[f].hi) return false;
    } else if (!std::binary_search(cat_candidates[f].begin(), cat_candidates[f].end(),
                                   static_cast<int>(row[f]))) {
      return false;
    }
  }
  return true;
}

bool FeatureBox::subset_of(const FeatureSchema& schema, const FeatureBox& other) const {
  for (std::size_t f = 0; f < schema.n_features(); ++f) {
    if (schema.features[f].kind == FeatureKind::numerical) {
      if (intervals[f].lo < other.intervals[f].lo || intervals[f].hi > other.intervals[f].hi)
        return false;
    } else {
      if (!std::includes(other.cat_candidates[f].begin(), other.cat_candidates[f].end(),
                         cat_candidates[f].begin(), cat_candidates[f].end()))
        return false;
    }
  }
  return true;
}

double FeatureBox::midpoint(const FeatureSchema& schema, std::size_t feature, double clamp_lo,
                            double clamp_hi) const {
  if (schema.features[feature].kind == FeatureKind::categorical)
    return static_cast<double>(cat_candidates[feature].front());
  double lo = intervals[feature].lo;
  double hi = intervals[feature].hi;
  if (!std::isfinite(lo)) lo = clamp_lo;
  if (!std::isfinite(hi)) hi = clamp_hi;
  if (lo > hi) std::swap(lo, hi);
  return 0.5 * (lo + hi);
}

// --- Probing ------------------------------------------------------------------

namespace {

void require_stats(const Tree& tree) {
  if (!tree.stats_present()) throw StatisticsWithheldError();
}

std::vector<LeafCount> counts_from_factor(const Tree& tree, double per_sample_hessian) {
  require_stats(tree);
  std::vector<LeafCount> out;
  for (int leaf : tree.leaf_ids()) {
    double raw = tree.nodes[leaf].stats->hess_sum / per_sample_hessian;
    long long n = std::llround(raw);
    LeafCount lc;
    lc.leaf_id = leaf;
    lc.residual = std::fabs(static_cast<double>(n) - raw);
    lc.n = std::max(0ll, n);
    out.push_back(lc);
  }
  return out;
}

double leaf_grad_from_value(const TreeNode& node, double eta, double lambda) {
  return -node.leaf_value / eta * (node.stats->hess_sum + lambda);
}

}  // namespace

std::vector<LeafCount> infer_leaf_counts(const Tree& first_tree, double base_score) {
  if (base_score <= 0.0 || base_score >= 1.0)
    throw AttackError("infer_leaf_counts: base score must be in (0,1)");
  return counts_from_factor(first_tree, base_score * (1.0 - base_score));
}

std::vector<LeafLabelSplit> infer_label_distribution(const Tree& first_tree,
                                                     const std::vector<LeafCount>& counts,
                                                     double eta, double lambda,
                                                     double base_score) {
  if (base_score <= 0.0 || base_score >= 1.0)
    throw AttackError("infer_label_distribution: base score must be in (0,1)");
  require_stats(first_tree);
  std::vector<LeafLabelSplit> out;
  for (const auto& count : counts) {
    const TreeNode& node = first_tree.nodes[count.leaf_id];
    double grad = leaf_grad_from_value(node, eta, lambda);
    double raw = static_cast<double>(count.n) * base_score - grad;
    long long n1 = std::llround(raw);
    LeafLabelSplit split;
    split.leaf_id = count.leaf_id;
    split.residual = std::fabs(static_cast<double>(n1) - raw);
    split.n1 = std::clamp(n1, 0ll, count.n);
    split.n0 = count.n - split.n1;
    out.push_back(split);
  }
  return out;
}

std::vector<LeafCount> infer_leaf_counts_softmax(const Tree& first_tree, int n_classes) {
  if (n_classes < 2) throw AttackError("infer_leaf_counts_softmax: need >= 2 classes");
  double p = 1.0 / static_cast<double>(n_classes);
  return counts_from_factor(first_tree, 2.0 * p * (1.0 - p));
}

std::vector<LeafCount> infer_class_counts(const Tree& class_tree,
                                          const std::vector<LeafCount>& counts, double eta,
                                          double lambda, int n_classes) {
  require_stats(class_tree);
  double p = 1.0 / static_cast<double>(n_classes);
  std::vector<LeafCount> out;
  for (const auto& count : counts) {
    const TreeNode& node = class_tree.nodes[count.leaf_id];
    double grad = leaf_grad_from_value(node, eta, lambda);
    double raw = static_cast<double>(count.n) * p - grad;
    long long n = std::llround(raw);
    LeafCount lc;
    lc.leaf_id = count.leaf_id;
    lc.residual = std::fabs(static_cast<double>(n) - raw);
    lc.n = std::clamp(n, 0ll, count.n);
    out.push_back(lc);
  }
  return out;
}

// --- Geometry -----------------------------------------------------------------

namespace {

void collect_path_boxes(const Tree& tree, int node, FeatureBox box, const FeatureSchema& schema,
                        std::map<int, FeatureBox>& out) {
  const TreeNode& n = tree.nodes[node];
  if (n.is_leaf) {
    out.emplace(node, std::move(box));
    return;
  }
  FeatureBox left = box;
  left.restrict(schema, n.feature, n.threshold, true);
  collect_path_boxes(tree, n.left, std::move(left), schema, out);
  box.restrict(schema, n.feature, n.threshold, false);
  collect_path_boxes(tree, n.right, std::move(box), schema, out);
}

std::map<int, FeatureBox> all_leaf_boxes(const Tree& tree, const FeatureSchema& schema) {
  std::map<int, FeatureBox> out;
  collect_path_boxes(tree, 0, FeatureBox::unconstrained(schema), schema, out);
  return out;
}

}  // namespace

FeatureBox leaf_path_box(const Tree& tree, int leaf_id, const FeatureSchema& schema) {
  auto boxes = all_leaf_boxes(tree, schema);
  auto it = boxes.find(leaf_id);
  if (it == boxes.end()) throw AttackError("leaf_path_box: not a leaf id");
  return it->second;
}

std::vector<int> reachable_leaves(const FeatureBox& box, const Tree& tree,
                                  const FeatureSchema& schema) {
  std::vector<int> out;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    const TreeNode& n = tree.nodes[id];
    if (n.is_leaf) {
      out.push_back(id);
      continue;
    }
    bool left_feasible, right_feasible;
    if (schema.features[n.feature].kind == FeatureKind::numerical) {
      left_feasible = box.intervals[n.feature].lo < n.threshold;
      right_feasible = box.intervals[n.feature].hi > n.threshold;
    } else {
      const auto& cands = box.cat_candidates[n.feature];
      left_feasible = !cands.empty() && cands.front() < n.threshold;
      right_feasible = !cands.empty() && cands.back() >= n.threshold;
    }
    if (right_feasible) stack.push_back(n.right);
    if (left_feasible) stack.push_back(n.left);
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw AttackError("reachable_leaves: empty reachable set");
  return out;
}

ReconstructedDataset init_dataset(const Tree& first_tree, const std::vector<LeafCount>& counts,
                                  const std::vector<LeafLabelSplit>& labels,
                                  const FeatureSchema& schema, const FeatureStats& global_bounds,
                                  const BoostParams& params) {
  ReconstructedDataset recon;
  recon.schema = schema;
  recon.source_params = params;
  recon.attacker_bounds = global_bounds;
  auto boxes = all_leaf_boxes(first_tree, schema);
  for (std::size_t j = 0; j < counts.size(); ++j) {
    const auto& box = boxes.at(counts[j].leaf_id);
    double leaf_value = first_tree.nodes[counts[j].leaf_id].leaf_value;
    for (long long i = 0; i < counts[j].n; ++i) {
      ReconstructedSample s;
      s.box = box;
      s.label = i < labels[j].n1 ? 1 : 0;
      s.origin_leaf = counts[j].leaf_id;
      s.margin_acc = {leaf_value};
      recon.samples.push_back(std::move(s));
    }
  }
  return recon;
}

void update_sample_stats(ReconstructedDataset& recon, int n_classes) {
  const double b = recon.source_params.base_score;
  const bool multi = n_classes > 2;
  for (auto& s : recon.samples) {
    if (!multi) {
      double p = clamp_probability(sigmoid(logit(b) + s.margin_acc[0]));
      auto [g, h] = logloss_grad_hess(p, s.label);
      s.p = {p};
      s.g = {g};
      s.h = {h};
    } else {
      std::vector<double> logits(s.margin_acc.size());
      for (std::size_t c = 0; c < logits.size(); ++c) logits[c] = b + s.margin_acc[c];
      auto p = softmax(logits);
      s.p.resize(p.size());
      s.g.resize(p.size());
      s.h.resize(p.size());
      for (std::size_t c = 0; c < p.size(); ++c) {
        double pc = clamp_probability(p[c]);
        auto [g, h] = softmax_grad_hess(pc, s.label == static_cast<int>(c) ? 1 : 0);
        s.p[c] = pc;
        s.g[c] = g;
        s.h[c] = h;
      }
    }
  }
}

double surrogate_foreign_leaf(const ReconstructedSample& sample, const Tree& foreign_tree,
                              const FeatureSchema& schema) {
  require_stats(foreign_tree);
  auto leaves = reachable_leaves(sample.box, foreign_tree, schema);
  double weighted = 0.0, weight = 0.0, plain = 0.0;
  for (int leaf : leaves) {
    const TreeNode& n = foreign_tree.nodes[leaf];
    weighted += n.stats->hess_sum * n.leaf_value;
    weight += n.stats->hess_sum;
    plain += n.leaf_value;
  }
  if (weight == 0.0) return plain / static_cast<double>(leaves.size());
  return weighted / weight;
}

// --- Feature Range Inference ----------------------------------------------------

std::string tree_solve_status_name(TreeSolveStatus s) {
  switch (s) {
    case TreeSolveStatus::optimal: return "optimal";
    case TreeSolveStatus::time_limited: return "time_limited";
    case TreeSolveStatus::infeasible_relaxed: return "infeasible_relaxed";
  }
  return "unknown";
}

PerTreeRecord feature_range_inference(ReconstructedDataset& recon, const Tree& tree,
                                      int class_slot, double time_limit_s, int tree_index) {
  require_stats(tree);
  const auto start = std::chrono::steady_clock::now();

  auto leaves = tree.leaf_ids();
  std::map<int, int> dense;  // leaf id -> problem index
  AssignmentProblem problem;
  for (int leaf : leaves) {
    dense[leaf] = static_cast<int>(problem.leaves.size());
    problem.leaves.push_back(
        {tree.nodes[leaf].stats->grad_sum, tree.nodes[leaf].stats->hess_sum});
  }
  for (const auto& s : recon.samples) {
    AssignmentProblem::Sample ps;
    ps.g = s.g.at(class_slot);
    ps.h = s.h.at(class_slot);
    for (int leaf : reachable_leaves(s.box, tree, recon.schema)) ps.reachable.push_back(dense[leaf]);
    problem.samples.push_back(std::move(ps));
  }

  Assignment solution = solve(problem, time_limit_s);

  auto boxes = all_leaf_boxes(tree, recon.schema);
  for (std::size_t i = 0; i < recon.samples.size(); ++i) {
    int leaf = leaves[solution.leaf_of[i]];
    recon.samples[i].box.intersect(recon.schema, boxes.at(leaf));
    recon.samples[i].margin_acc[class_slot] += tree.nodes[leaf].leaf_value;
  }

  PerTreeRecord record;
  record.tree_index = tree_index;
  record.status = solution.status == SolveStatus::optimal ? TreeSolveStatus::optimal
                                                          : TreeSolveStatus::time_limited;
  record.objective = solution.objective;
  record.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

// --- Chain identification --------------------------------------------------------

namespace {

std::vector<double> node_hessians(const Tree& tree) {
  std::vector<double> out;
  for (const auto& n : tree.nodes) out.push_back(n.stats ? n.stats->hess_sum : 0.0);
  return out;
}

double vector_distance(const std::vector<double>& a, const std::vector<double>& b) {
  std::size_t n = std::max(a.size(), b.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double av = i < a.size() ? a[i] : 0.0;
    double bv = i < b.size() ? b[i] : 0.0;
    sq += (av - bv) * (av - bv);
  }
  return std::sqrt(sq);
}

}  // namespace

ChainResult identify_tree_chains(const ClientView& view, int n_clients) {
  const auto& trees = view.model.trees;
  const int k = view.model.multiclass() ? view.model.n_classes : 1;
  const int unit = n_clients * k;
  if (trees.empty() || unit <= 0 || trees.size() % static_cast<std::size_t>(unit) != 0)
    throw AttackError("identify_tree_chains: malformed round structure");
  const int rounds = static_cast<int>(trees.size()) / unit;
  for (const auto& t : trees) require_stats(t);

  auto group_sig = [&](int r, int g) {
    std::vector<double> sig;
    for (int c = 0; c < k; ++c) {
      const Tree& t = trees[r * unit + g * k + c];
      sig.push_back(t.nodes[0].stats->hess_sum);
    }
    return sig;
  };
  auto group_nodes = [&](int r, int g) {
    std::vector<double> all;
    for (int c = 0; c < k; ++c) {
      auto h = node_hessians(trees[r * unit + g * k + c]);
      all.insert(all.end(), h.begin(), h.end());
    }
    return all;
  };

  ChainResult result;
  result.chains.resize(n_clients);
  std::vector<std::vector<double>> prev_sig(n_clients), prev_nodes(n_clients);
  for (int g = 0; g < n_clients; ++g) {
    for (int c = 0; c < k; ++c) result.chains[g].push_back(g * k + c);
    prev_sig[g] = group_sig(0, g);
    prev_nodes[g] = group_nodes(0, g);
  }

  for (int r = 1; r < rounds; ++r) {
    std::vector<std::vector<double>> cost(n_clients, std::vector<double>(n_clients, 0.0));
    for (int chain = 0; chain < n_clients; ++chain)
      for (int g = 0; g < n_clients; ++g)
        cost[chain][g] = vector_distance(prev_sig[chain], group_sig(r, g)) +
                         1e-6 * vector_distance(prev_nodes[chain], group_nodes(r, g));
    auto match = hungarian(cost);
    // Swap-neutral pairs mean the grouping is arbitrary for this round.
    for (int a = 0; a < n_clients && !result.ambiguous; ++a)
      for (int b = a + 1; b < n_clients; ++b) {
        double kept = cost[a][match[a]] + cost[b][match[b]];
        double swapped = cost[a][match[b]] + cost[b][match[a]];
        if (std::fabs(kept - swapped) <= 1e-12) {
          result.ambiguous = true;
          break;
        }
      }
    for (int chain = 0; chain < n_clients; ++chain) {
      int g = match[chain];
      for (int c = 0; c < k; ++c) result.chains[chain].push_back(r * unit + g * k + c);
      prev_sig[chain] = group_sig(r, g);
      prev_nodes[chain] = group_nodes(r, g);
    }
  }
  return result;
}

// --- Orchestration -----------------------------------------------------------------

namespace {

struct AttackPlan {
  std::vector<int> victim_trees;   // ordered, K per round for multiclass
  std::vector<int> foreign_trees;  // ordered; empty for fedxgbllr/histogram
  int victim_tag = -1;             // recorded in the report (-1 = global)
  bool chain_ambiguous = false;
};

AttackPlan make_plan(const ClientView& view, const AttackOptions& opts) {
  AttackPlan plan;
  const int n_trees = static_cast<int>(view.model.trees.size());
  switch (view.protocol) {
    case Protocol::hardened_histogram:
      // Precondition check happens on the first probed tree; reaching here
      // means the caller wants the standard flow, which will throw.
      [[fallthrough]];
    case Protocol::histogram: {
      for (int t = 0; t < n_trees; ++t) plan.victim_trees.push_back(t);
      plan.victim_tag = -1;
      return plan;
    }
    case Protocol::fedxgbllr: {
      if (!opts.victim) throw AttackError("attack: victim client id required for fedxgbllr");
      for (int t = 0; t < n_trees; ++t)
        if (view.model.trees[t].client_id == *opts.victim) plan.victim_trees.push_back(t);
      if (plan.victim_trees.empty()) throw AttackError("attack: victim has no trees");
      plan.victim_tag = *opts.victim;
      return plan;
    }
    case Protocol::cyclic: {
      if (!opts.victim) throw AttackError("attack: victim client id required for cyclic");
      for (int t = 0; t < n_trees; ++t) {
        if (view.model.trees[t].client_id == *opts.victim)
          plan.victim_trees.push_back(t);
        else
          plan.foreign_trees.push_back(t);
      }
      if (plan.victim_trees.empty()) throw AttackError("attack: victim has no trees");
      plan.victim_tag = *opts.victim;
      return plan;
    }
    case Protocol::bagging: {
      if (!opts.victim) throw AttackError("attack: victim chain index required for bagging");
      if (view.round_log.empty()) throw AttackError("attack: bagging view lacks a round log");
      const int k = view.model.multiclass() ? view.model.n_classes : 1;
      const int n_clients = static_cast<int>(view.round_log.front().tree_indices.size()) / k;
      auto chains = identify_tree_chains(view, n_clients);
      if (*opts.victim < 0 || *opts.victim >= n_clients)
        throw AttackError("attack: victim chain index out of range");
      plan.victim_trees = chains.chains[*opts.victim];
      plan.chain_ambiguous = chains.ambiguous;
      std::vector<bool> is_victim(n_trees, false);
      for (int t : plan.victim_trees) is_victim[t] = true;
      for (int t = 0; t < n_trees; ++t)
        if (!is_victim[t]) plan.foreign_trees.push_back(t);
      plan.victim_tag = *opts.victim;
      return plan;
    }
  }
  throw AttackError("attack: unknown protocol");
}

}  // namespace

AttackReport attack(const ClientView& view, const Dataset& adversary_data,
                    const AttackOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  if (view.model.trees.empty()) throw AttackError("attack: empty model");
  const FeatureSchema& schema = adversary_data.schema;
  const BoostParams& params = view.params;
  const int n_classes = view.model.n_classes;
  const bool multi = n_classes > 2;
  const int k = multi ? n_classes : 1;

  AttackPlan plan = make_plan(view, opts);
  const auto& trees = view.model.trees;
  FeatureStats bounds = feature_stats(adversary_data);

  // --- Phase 1: probe the victim's first tree (first K trees for multiclass).
  AttackReport report;
  report.chain_ambiguous = plan.chain_ambiguous;
  ReconstructedDataset recon;
  if (!multi) {
    const Tree& first = trees[plan.victim_trees[0]];
    auto counts = infer_leaf_counts(first, params.base_score);
    auto labels = infer_label_distribution(first, counts, params.learning_rate, params.lambda,
                                           params.base_score);
    recon = init_dataset(first, counts, labels, schema, bounds, params);
  } else {
    recon.schema = schema;
    recon.source_params = params;
    recon.attacker_bounds = bounds;
    std::vector<const Tree*> first_block;
    for (int c = 0; c < k; ++c) first_block.push_back(&trees[plan.victim_trees[c]]);
    for (int c = 0; c < k; ++c) {
      const Tree& tree_c = *first_block[c];
      auto counts = infer_leaf_counts_softmax(tree_c, n_classes);
      auto class_counts =
          infer_class_counts(tree_c, counts, params.learning_rate, params.lambda, n_classes);
      auto boxes = all_leaf_boxes(tree_c, schema);
      for (std::size_t j = 0; j < class_counts.size(); ++j) {
        for (long long i = 0; i < class_counts[j].n; ++i) {
          ReconstructedSample s;
          s.box = boxes.at(class_counts[j].leaf_id);
          s.label = c;
          s.origin_leaf = class_counts[j].leaf_id;
          s.margin_acc.assign(k, 0.0);
          s.margin_acc[c] = tree_c.nodes[class_counts[j].leaf_id].leaf_value;
          recon.samples.push_back(std::move(s));
        }
      }
    }
    // Leaves in the other first-round class trees are unresolved; approximate
    // their contribution with the Hessian-weighted surrogate.
    for (auto& s : recon.samples)
      for (int c = 0; c < k; ++c)
        if (c != s.label) s.margin_acc[c] += surrogate_foreign_leaf(s, *first_block[c], schema);
  }
  recon.victim = plan.victim_tag;

  // Foreign trees broadcast before the victim's first tree feed the margin
  // accumulators retroactively, now that samples exist.
  const int first_pos = plan.victim_trees[multi ? k - 1 : 0];
  for (int t : plan.foreign_trees) {
    if (t > first_pos) continue;
    int slot = multi ? trees[t].class_index : 0;
    for (auto& s : recon.samples) s.margin_acc[slot] += surrogate_foreign_leaf(s, trees[t], schema);
  }
  update_sample_stats(recon, n_classes);
  report.phase1 = recon;

  // --- Phase 2: one assignment problem per subsequent victim tree, with
  // statistics refreshed per tree (binary) or per round of K trees.
  std::size_t foreign_cursor = 0;
  // advance past the already-applied foreign prefix
  while (foreign_cursor < plan.foreign_trees.size() &&
         plan.foreign_trees[foreign_cursor] <= first_pos)
    ++foreign_cursor;

  const std::size_t first_block_len = multi ? static_cast<std::size_t>(k) : 1;
  for (std::size_t v = first_block_len; v < plan.victim_trees.size(); v += first_block_len) {
    // Foreign trees from rounds strictly before this victim block were built
    // from earlier margins; fold them in before refreshing statistics.
    const int block_round = trees[plan.victim_trees[v]].round;
    while (foreign_cursor < plan.foreign_trees.size()) {
      int t = plan.foreign_trees[foreign_cursor];
      if (trees[t].round >= block_round) break;
      int slot = multi ? trees[t].class_index : 0;
      for (auto& s : recon.samples)
        s.margin_acc[slot] += surrogate_foreign_leaf(s, trees[t], schema);
      ++foreign_cursor;
    }
    update_sample_stats(recon, n_classes);
    for (std::size_t c = 0; c < first_block_len && v + c < plan.victim_trees.size(); ++c) {
      int tree_index = plan.victim_trees[v + c];
      int slot = multi ? trees[tree_index].class_index : 0;
      report.per_tree.push_back(feature_range_inference(recon, trees[tree_index], slot,
                                                        opts.time_limit_s, tree_index));
    }
    // Same-round foreign trees were trained in parallel with this block; they
    // join the accumulators after the block is solved.
    while (foreign_cursor < plan.foreign_trees.size()) {
      int t = plan.foreign_trees[foreign_cursor];
      if (trees[t].round > block_round) break;
      int slot = multi ? trees[t].class_index : 0;
      for (auto& s : recon.samples)
        s.margin_acc[slot] += surrogate_foreign_leaf(s, trees[t], schema);
      ++foreign_cursor;
    }
  }
  update_sample_stats(recon, n_classes);
  report.final = std::move(recon);
  report.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace fedgbdt
