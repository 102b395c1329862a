#include "fedgbdt/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace fedgbdt {

namespace {
constexpr double kProbClamp = 1e-9;
constexpr double kDenomGuard = 1e-12;
}  // namespace

void BoostParams::validate() const {
  if (n_trees < 0) throw ConfigError("boost: n_trees must be >= 0");
  if (max_depth < 0) throw ConfigError("boost: max_depth must be >= 0");
  if (learning_rate <= 0.0) throw ConfigError("boost: learning_rate must be positive");
  if (lambda < 0.0) throw ConfigError("boost: lambda must be >= 0");
  if (gamma < 0.0) throw ConfigError("boost: gamma must be >= 0");
  if (base_score <= 0.0 || base_score >= 1.0)
    throw ConfigError("boost: base_score must be in (0,1)");
  if (n_bins < 2) throw ConfigError("boost: n_bins must be >= 2");
  if (min_child_hessian < 0.0) throw ConfigError("boost: min_child_hessian must be >= 0");
}

int Tree::route(std::span<const double> row) const {
  int id = 0;
  while (!nodes[id].is_leaf) {
    const TreeNode& n = nodes[id];
    id = row[n.feature] < n.threshold ? n.left : n.right;
  }
  return id;
}

double Tree::value(std::span<const double> row) const { return nodes[route(row)].leaf_value; }

std::vector<int> Tree::leaf_ids() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].is_leaf) out.push_back(static_cast<int>(i));
  return out;
}

bool Tree::stats_present() const {
  for (const auto& n : nodes)
    if (!n.stats) return false;
  return !nodes.empty();
}

Tree Tree::without_stats() const {
  Tree t = *this;
  for (auto& n : t.nodes) n.stats.reset();
  return t;
}

void Histogram::add(const Histogram& other) {
  if (edges != other.edges) throw TrainError("histogram: incompatible bin edges");
  for (std::size_t f = 0; f < bins.size(); ++f)
    for (std::size_t b = 0; b < bins[f].size(); ++b) {
      bins[f][b].grad_sum += other.bins[f][b].grad_sum;
      bins[f][b].hess_sum += other.bins[f][b].hess_sum;
      bins[f][b].count += other.bins[f][b].count;
    }
}

NodeStats Histogram::feature_total(std::size_t feature) const {
  NodeStats t;
  for (const auto& b : bins[feature]) {
    t.grad_sum += b.grad_sum;
    t.hess_sum += b.hess_sum;
  }
  return t;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

double clamp_probability(double p) {
  return std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
}

std::pair<double, double> logloss_grad_hess(double p, int y) {
  if (p <= 0.0 || p >= 1.0) throw TrainError("logloss_grad_hess: p must be in (0,1)");
  return {p - static_cast<double>(y), p * (1.0 - p)};
}

std::pair<double, double> softmax_grad_hess(double p_c, int y_is_c) {
  if (p_c <= 0.0 || p_c >= 1.0) throw TrainError("softmax_grad_hess: p must be in (0,1)");
  return {p_c - static_cast<double>(y_is_c), 2.0 * p_c * (1.0 - p_c)};
}

double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma) {
  double g = gl + gr;
  double h = hl + hr;
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) -
         gamma;
}

std::vector<std::vector<double>> quantile_edges(const Dataset& data,
                                                std::span<const std::size_t> indices,
                                                int n_bins) {
  std::vector<std::vector<double>> edges(data.schema.n_features());
  for (std::size_t f = 0; f < data.schema.n_features(); ++f) {
    std::vector<double> vals;
    vals.reserve(indices.size());
    for (auto i : indices) vals.push_back(data.rows[i][f]);
    std::sort(vals.begin(), vals.end());
    std::vector<double> e;
    for (int k = 1; k < n_bins; ++k) {
      std::size_t pos = (static_cast<std::size_t>(k) * vals.size()) / static_cast<std::size_t>(n_bins);
      e.push_back(vals[pos]);
    }
    std::sort(e.begin(), e.end());
    e.erase(std::unique(e.begin(), e.end()), e.end());
    edges[f] = std::move(e);
  }
  return edges;
}

Histogram build_histogram(const Dataset& data, std::span<const std::size_t> indices,
                          std::span<const double> g, std::span<const double> h,
                          const std::vector<std::vector<double>>& edges) {
  if (g.size() != h.size()) throw TrainError("build_histogram: g/h length mismatch");
  Histogram hist;
  hist.edges = edges;
  hist.bins.resize(edges.size());
  for (std::size_t f = 0; f < edges.size(); ++f) hist.bins[f].assign(edges[f].size() + 1, {});
  for (auto i : indices) {
    for (std::size_t f = 0; f < edges.size(); ++f) {
      const auto& e = edges[f];
      auto b = static_cast<std::size_t>(
          std::upper_bound(e.begin(), e.end(), data.rows[i][f]) - e.begin());
      auto& bin = hist.bins[f][b];
      bin.grad_sum += g[i];
      bin.hess_sum += h[i];
      ++bin.count;
    }
  }
  return hist;
}

std::optional<SplitCandidate> best_split(const Histogram& hist, double lambda, double gamma,
                                         double min_child_hessian) {
  std::optional<SplitCandidate> best;
  for (std::size_t f = 0; f < hist.edges.size(); ++f) {
    NodeStats total = hist.feature_total(f);
    NodeStats left;
    for (std::size_t j = 0; j < hist.edges[f].size(); ++j) {
      left.grad_sum += hist.bins[f][j].grad_sum;
      left.hess_sum += hist.bins[f][j].hess_sum;
      NodeStats right{total.grad_sum - left.grad_sum, total.hess_sum - left.hess_sum};
      if (lambda == 0.0 && (left.hess_sum == 0.0 || right.hess_sum == 0.0)) continue;
      if (left.hess_sum < min_child_hessian || right.hess_sum < min_child_hessian) continue;
      double gain =
          split_gain(left.grad_sum, left.hess_sum, right.grad_sum, right.hess_sum, lambda, gamma);
      if (!best || gain > best->gain) {
        best = SplitCandidate{static_cast<int>(f), hist.edges[f][j], gain, left, right};
      }
    }
  }
  if (best && best->gain > 0.0) return best;
  return std::nullopt;
}

Tree train_tree(const Dataset& data, std::span<const std::size_t> indices,
                std::span<const double> g, std::span<const double> h, const BoostParams& params,
                const std::vector<std::vector<double>>& edges) {
  if (indices.empty()) throw TrainError("train_tree: no rows");
  Tree tree;

  struct Pending {
    int node_id;
    std::vector<std::size_t> rows;
    int depth;
  };
  std::deque<Pending> queue;

  auto make_node = [&](std::vector<std::size_t> rows) {
    NodeStats s;
    for (auto i : rows) {
      s.grad_sum += g[i];
      s.hess_sum += h[i];
    }
    TreeNode n;
    n.stats = s;
    tree.nodes.push_back(n);
    return static_cast<int>(tree.nodes.size() - 1);
  };

  {
    std::vector<std::size_t> rows(indices.begin(), indices.end());
    int root = make_node(rows);
    queue.push_back({root, std::move(rows), 0});
  }

  while (!queue.empty()) {
    Pending cur = std::move(queue.front());
    queue.pop_front();
    TreeNode& node = tree.nodes[cur.node_id];
    std::optional<SplitCandidate> split;
    if (cur.depth < params.max_depth) {
      Histogram hist = build_histogram(data, cur.rows, g, h, edges);
      split = best_split(hist, params.lambda, params.gamma, params.min_child_hessian);
    }
    if (!split) {
      const NodeStats& s = *node.stats;
      double denom = s.hess_sum + params.lambda;
      node.is_leaf = true;
      node.leaf_value = std::fabs(denom) < kDenomGuard
                            ? 0.0
                            : -params.learning_rate * s.grad_sum / denom;
      continue;
    }
    std::vector<std::size_t> left_rows, right_rows;
    for (auto i : cur.rows) {
      if (data.rows[i][split->feature] < split->threshold)
        left_rows.push_back(i);
      else
        right_rows.push_back(i);
    }
    int left_id = make_node(left_rows);
    int right_id = make_node(right_rows);
    TreeNode& n = tree.nodes[cur.node_id];  // make_node may have reallocated
    n.is_leaf = false;
    n.feature = split->feature;
    n.threshold = split->threshold;
    n.left = left_id;
    n.right = right_id;
    queue.push_back({left_id, std::move(left_rows), cur.depth + 1});
    queue.push_back({right_id, std::move(right_rows), cur.depth + 1});
  }
  return tree;
}

std::vector<double> softmax(std::span<const double> logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

Ensemble train_ensemble(const Dataset& data, const BoostParams& params) {
  params.validate();
  data.validate();
  if (data.rows.empty()) throw TrainError("train_ensemble: empty dataset");
  Ensemble ens;
  ens.params = params;
  ens.n_classes = data.schema.label.classes;

  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  auto edges = quantile_edges(data, all, params.n_bins);

  if (!data.schema.multiclass()) {
    std::vector<double> margin(data.size(), logit(params.base_score));
    std::vector<double> g(data.size()), h(data.size());
    for (int t = 0; t < params.n_trees; ++t) {
      for (std::size_t i = 0; i < data.size(); ++i) {
        double p = clamp_probability(sigmoid(margin[i]));
        std::tie(g[i], h[i]) = logloss_grad_hess(p, data.labels[i]);
      }
      Tree tree = train_tree(data, all, g, h, params, edges);
      tree.round = t;
      for (std::size_t i = 0; i < data.size(); ++i) margin[i] += tree.value(data.rows[i]);
      ens.trees.push_back(std::move(tree));
    }
    return ens;
  }

  const int k = data.schema.label.classes;
  std::vector<std::vector<double>> margin(data.size(), std::vector<double>(k, params.base_score));
  std::vector<double> g(data.size()), h(data.size());
  for (int t = 0; t < params.n_trees; ++t) {
    std::vector<std::vector<double>> probs(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) probs[i] = softmax(margin[i]);
    std::vector<Tree> round_trees;
    for (int c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < data.size(); ++i) {
        double p = clamp_probability(probs[i][c]);
        std::tie(g[i], h[i]) = softmax_grad_hess(p, data.labels[i] == c ? 1 : 0);
      }
      Tree tree = train_tree(data, all, g, h, params, edges);
      tree.round = t;
      tree.class_index = c;
      round_trees.push_back(std::move(tree));
    }
    // Margins refresh only after the full round of K trees.
    for (int c = 0; c < k; ++c)
      for (std::size_t i = 0; i < data.size(); ++i)
        margin[i][c] += round_trees[c].value(data.rows[i]);
    for (auto& tree : round_trees) ens.trees.push_back(std::move(tree));
  }
  return ens;
}

double predict_margin(const Ensemble& ens, std::span<const double> row) {
  if (ens.multiclass()) throw EvalError("predict_margin: ensemble is multiclass");
  double m = logit(ens.params.base_score);
  for (const auto& t : ens.trees) m += t.value(row);
  return m;
}

std::vector<double> predict_margins(const Ensemble& ens, std::span<const double> row) {
  if (!ens.multiclass()) return {predict_margin(ens, row)};
  std::vector<double> m(ens.n_classes, ens.params.base_score);
  for (const auto& t : ens.trees) {
    if (t.class_index < 0 || t.class_index >= ens.n_classes)
      throw EvalError("predict_margins: tree without class index in multiclass ensemble");
    m[t.class_index] += t.value(row);
  }
  return m;
}

double predict_proba(const Ensemble& ens, std::span<const double> row) {
  return sigmoid(predict_margin(ens, row));
}

std::vector<double> predict_probas(const Ensemble& ens, std::span<const double> row) {
  if (!ens.multiclass()) {
    double p = predict_proba(ens, row);
    return {1.0 - p, p};
  }
  auto m = predict_margins(ens, row);
  return softmax(m);
}

}  // namespace fedgbdt
