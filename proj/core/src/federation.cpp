#include "fedgbdt/federation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "fedgbdt/errors.hpp"
#include "fedgbdt/rng.hpp"

namespace fedgbdt {

std::string protocol_name(Protocol p) {
  switch (p) {
    case Protocol::bagging: return "bagging";
    case Protocol::cyclic: return "cyclic";
    case Protocol::fedxgbllr: return "fedxgbllr";
    case Protocol::histogram: return "histogram";
    case Protocol::hardened_histogram: return "hardened_histogram";
  }
  throw ConfigError("unknown protocol");
}

Protocol protocol_from_name(const std::string& name) {
  if (name == "bagging") return Protocol::bagging;
  if (name == "cyclic") return Protocol::cyclic;
  if (name == "fedxgbllr") return Protocol::fedxgbllr;
  if (name == "histogram") return Protocol::histogram;
  if (name == "hardened_histogram") return Protocol::hardened_histogram;
  throw ConfigError("unknown protocol '" + name + "'");
}

void FedConfig::validate() const {
  if (n_clients < 2) throw ConfigError("federation: n_clients must be >= 2");
  if (rounds < 1) throw ConfigError("federation: rounds must be >= 1");
  boost.validate();
  if (defense) {
    if (protocol != Protocol::histogram && protocol != Protocol::hardened_histogram)
      throw ConfigError("federation: the histogram defense requires a histogram protocol");
    defense->validate();
  }
}

namespace {

// Per-client running margins against the broadcast model; slot 0 carries the
// binary margin, slots 0..K-1 the per-class multiclass margins.
class MarginState {
 public:
  MarginState(const std::vector<Dataset>& clients, const BoostParams& params, int n_classes)
      : clients_(&clients), n_classes_(n_classes) {
    bool multi = n_classes > 2;
    slots_ = multi ? n_classes : 1;
    double init = multi ? params.base_score : logit(params.base_score);
    margins_.resize(clients.size());
    for (std::size_t c = 0; c < clients.size(); ++c)
      margins_[c].assign(clients[c].size(), std::vector<double>(slots_, init));
  }

  int slots() const { return slots_; }

  void apply_tree(const Tree& tree, int slot) {
    for (std::size_t c = 0; c < margins_.size(); ++c)
      for (std::size_t i = 0; i < margins_[c].size(); ++i)
        margins_[c][i][slot] += tree.value((*clients_)[c].rows[i]);
  }

  // Probability snapshot for one client (per slot).
  std::vector<std::vector<double>> probabilities(std::size_t client) const {
    const auto& m = margins_[client];
    std::vector<std::vector<double>> p(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (slots_ == 1) {
        p[i] = {clamp_probability(sigmoid(m[i][0]))};
      } else {
        p[i] = softmax(m[i]);
        for (auto& v : p[i]) v = clamp_probability(v);
      }
    }
    return p;
  }

 private:
  const std::vector<Dataset>* clients_;
  int n_classes_;
  int slots_;
  std::vector<std::vector<std::vector<double>>> margins_;
};

// (g, h) for one client and class slot from a probability snapshot.
void stats_for_slot(const Dataset& data, const std::vector<std::vector<double>>& probs, int slot,
                    bool multiclass, std::vector<double>& g, std::vector<double>& h) {
  g.resize(data.size());
  h.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!multiclass) {
      std::tie(g[i], h[i]) = logloss_grad_hess(probs[i][0], data.labels[i]);
    } else {
      std::tie(g[i], h[i]) =
          softmax_grad_hess(probs[i][slot], data.labels[i] == slot ? 1 : 0);
    }
  }
}

std::vector<std::size_t> all_indices(const Dataset& d) {
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

void check_clients(const std::vector<Dataset>& clients, const FedConfig& cfg) {
  cfg.validate();
  if (clients.size() != static_cast<std::size_t>(cfg.n_clients))
    throw ConfigError("federation: client dataset count does not match n_clients");
  for (const auto& c : clients) {
    c.validate();
    if (c.rows.empty()) throw TrainError("federation: client with empty dataset");
    if (!(c.schema == clients.front().schema))
      throw ConfigError("federation: clients must share one schema");
  }
}

std::vector<ClientView> broadcast_views(const FedConfig& cfg, const Ensemble& model,
                                        const std::vector<RoundLogEntry>& log) {
  std::vector<ClientView> views(cfg.n_clients);
  for (int o = 0; o < cfg.n_clients; ++o) {
    views[o].observer = o;
    views[o].protocol = cfg.protocol;
    views[o].model = model;
    views[o].params = cfg.boost;
    views[o].round_log = log;
  }
  return views;
}

}  // namespace

FedResult run_bagging(const std::vector<Dataset>& clients, const FedConfig& cfg) {
  check_clients(clients, cfg);
  if (cfg.protocol != Protocol::bagging) throw ConfigError("run_bagging: wrong protocol");
  const int n_classes = clients.front().schema.label.classes;
  const bool multi = n_classes > 2;
  const int k = multi ? n_classes : 1;

  Ensemble global;
  global.params = cfg.boost;
  global.n_classes = n_classes;
  MarginState margins(clients, cfg.boost, n_classes);
  std::vector<RoundLogEntry> log;

  for (int r = 0; r < cfg.rounds; ++r) {
    // Every client trains from the round-start broadcast model.
    std::vector<std::vector<Tree>> trained(clients.size());
    for (std::size_t c = 0; c < clients.size(); ++c) {
      auto probs = margins.probabilities(c);
      auto idx = all_indices(clients[c]);
      auto edges = quantile_edges(clients[c], idx, cfg.boost.n_bins);
      std::vector<double> g, h;
      for (int slot = 0; slot < k; ++slot) {
        stats_for_slot(clients[c], probs, slot, multi, g, h);
        Tree t = train_tree(clients[c], idx, g, h, cfg.boost, edges);
        t.client_id = static_cast<int>(c);
        t.round = r;
        t.class_index = multi ? slot : -1;
        trained[c].push_back(std::move(t));
      }
    }
    // Seed-derived arrival order per round.
    std::vector<int> arrival(clients.size());
    std::iota(arrival.begin(), arrival.end(), 0);
    Rng order_rng = Rng::substream(cfg.seed, {kStreamBaggingOrder, static_cast<std::uint64_t>(r)});
    order_rng.shuffle(arrival);

    RoundLogEntry entry{r, "trees", {}};
    for (int c : arrival) {
      for (int slot = 0; slot < k; ++slot) {
        entry.tree_indices.push_back(static_cast<int>(global.trees.size()));
        global.trees.push_back(trained[c][slot]);
      }
    }
    log.push_back(std::move(entry));
    for (std::size_t t = global.trees.size() - static_cast<std::size_t>(k * cfg.n_clients);
         t < global.trees.size(); ++t)
      margins.apply_tree(global.trees[t], multi ? global.trees[t].class_index : 0);
  }

  // Arrival order is visible; true authorship is not.
  Ensemble visible = global;
  for (auto& t : visible.trees) t.client_id = -1;
  FedResult out;
  out.global = std::move(global);
  out.views = broadcast_views(cfg, visible, log);
  return out;
}

FedResult run_cyclic(const std::vector<Dataset>& clients, const FedConfig& cfg) {
  check_clients(clients, cfg);
  if (cfg.protocol != Protocol::cyclic) throw ConfigError("run_cyclic: wrong protocol");
  const int n_classes = clients.front().schema.label.classes;
  const bool multi = n_classes > 2;
  const int k = multi ? n_classes : 1;

  Ensemble global;
  global.params = cfg.boost;
  global.n_classes = n_classes;
  MarginState margins(clients, cfg.boost, n_classes);
  std::vector<RoundLogEntry> log;

  for (int r = 0; r < cfg.rounds; ++r) {
    const int c = r % cfg.n_clients;
    auto probs = margins.probabilities(c);
    auto idx = all_indices(clients[c]);
    auto edges = quantile_edges(clients[c], idx, cfg.boost.n_bins);
    RoundLogEntry entry{r, "ensemble", {}};
    std::vector<double> g, h;
    std::vector<Tree> round_trees;
    for (int slot = 0; slot < k; ++slot) {
      stats_for_slot(clients[c], probs, slot, multi, g, h);
      Tree t = train_tree(clients[c], idx, g, h, cfg.boost, edges);
      t.client_id = c;  // round-robin ordering is client-visible
      t.round = r;
      t.class_index = multi ? slot : -1;
      entry.tree_indices.push_back(static_cast<int>(global.trees.size()));
      global.trees.push_back(std::move(t));
      round_trees.push_back(global.trees.back());
    }
    for (int slot = 0; slot < k; ++slot)
      margins.apply_tree(round_trees[slot], multi ? slot : 0);
    log.push_back(std::move(entry));
  }

  FedResult out;
  out.views = broadcast_views(cfg, global, log);
  out.global = std::move(global);
  return out;
}

FedResult run_fedxgbllr(const std::vector<Dataset>& clients, const FedConfig& cfg) {
  check_clients(clients, cfg);
  if (cfg.protocol != Protocol::fedxgbllr) throw ConfigError("run_fedxgbllr: wrong protocol");
  const int n_classes = clients.front().schema.label.classes;
  const bool multi = n_classes > 2;

  // Round 1: independent local ensembles, concatenated with provenance.
  BoostParams local_params = cfg.boost;
  local_params.n_trees = cfg.rounds;
  Ensemble global;
  global.params = cfg.boost;
  global.n_classes = n_classes;
  RoundLogEntry round1{0, "local_ensembles", {}};
  for (std::size_t c = 0; c < clients.size(); ++c) {
    Ensemble local = train_ensemble(clients[c], local_params);
    for (auto& t : local.trees) {
      t.client_id = static_cast<int>(c);
      round1.tree_indices.push_back(static_cast<int>(global.trees.size()));
      global.trees.push_back(std::move(t));
    }
  }
  std::vector<RoundLogEntry> log{round1};
  log.push_back({1, "tree_weights", {}});

  // Scalar per-tree weights fit by federated gradient descent on the
  // weighted leaf-output model (stand-in for the CNN refinement; the trees
  // in the views are untouched).
  const std::size_t n_trees = global.trees.size();
  std::vector<double> weights(n_trees, 1.0);
  std::size_t n_total = 0;
  for (const auto& c : clients) n_total += c.size();
  // leaf value matrix per client: lv[c][i][t]
  std::vector<std::vector<std::vector<double>>> lv(clients.size());
  for (std::size_t c = 0; c < clients.size(); ++c) {
    lv[c].assign(clients[c].size(), std::vector<double>(n_trees, 0.0));
    for (std::size_t i = 0; i < clients[c].size(); ++i)
      for (std::size_t t = 0; t < n_trees; ++t)
        lv[c][i][t] = global.trees[t].value(clients[c].rows[i]);
  }
  const int kEpochs = 100;
  const double kLearningRate = 0.3;
  const int k = multi ? n_classes : 1;
  for (int epoch = 0; epoch < kEpochs; ++epoch) {
    std::vector<double> grad(n_trees, 0.0);
    for (std::size_t c = 0; c < clients.size(); ++c) {
      for (std::size_t i = 0; i < clients[c].size(); ++i) {
        std::vector<double> margin(k, multi ? cfg.boost.base_score : logit(cfg.boost.base_score));
        for (std::size_t t = 0; t < n_trees; ++t) {
          int slot = multi ? global.trees[t].class_index : 0;
          margin[slot] += weights[t] * lv[c][i][t];
        }
        std::vector<double> p =
            multi ? softmax(margin) : std::vector<double>{sigmoid(margin[0])};
        for (std::size_t t = 0; t < n_trees; ++t) {
          int slot = multi ? global.trees[t].class_index : 0;
          double y = multi ? (clients[c].labels[i] == slot ? 1.0 : 0.0)
                           : static_cast<double>(clients[c].labels[i]);
          grad[t] += (p[slot] - y) * lv[c][i][t];
        }
      }
    }
    for (std::size_t t = 0; t < n_trees; ++t)
      weights[t] -= kLearningRate * grad[t] / static_cast<double>(n_total);
  }

  FedResult out;
  out.views = broadcast_views(cfg, global, log);
  out.global = std::move(global);
  out.tree_weights = std::move(weights);
  return out;
}

namespace {

// Server-side merge of client-proposed quantile edges; divergent proposals
// are merged, deduplicated, and truncated to n_bins by uniform subsampling.
std::vector<std::vector<double>> merged_edges(const std::vector<Dataset>& clients, int n_bins) {
  std::vector<std::vector<double>> merged(clients.front().schema.n_features());
  for (const auto& client : clients) {
    auto idx = all_indices(client);
    auto proposal = quantile_edges(client, idx, n_bins);
    for (std::size_t f = 0; f < merged.size(); ++f)
      merged[f].insert(merged[f].end(), proposal[f].begin(), proposal[f].end());
  }
  for (auto& e : merged) {
    std::sort(e.begin(), e.end());
    e.erase(std::unique(e.begin(), e.end()), e.end());
    if (static_cast<int>(e.size()) > n_bins) {
      std::vector<double> keep;
      keep.reserve(n_bins);
      for (int i = 0; i < n_bins; ++i) {
        std::size_t pos = (static_cast<std::size_t>(i) * (e.size() - 1)) /
                          static_cast<std::size_t>(n_bins - 1);
        keep.push_back(e[pos]);
      }
      keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
      e = std::move(keep);
    }
  }
  return merged;
}

}  // namespace

FedResult run_histogram(const std::vector<Dataset>& clients, const FedConfig& cfg) {
  check_clients(clients, cfg);
  if (cfg.protocol != Protocol::histogram && cfg.protocol != Protocol::hardened_histogram)
    throw ConfigError("run_histogram: wrong protocol");
  const int n_classes = clients.front().schema.label.classes;
  const bool multi = n_classes > 2;
  const int k = multi ? n_classes : 1;
  const int total_trees = cfg.rounds * k;
  const bool dp = cfg.defense.has_value();
  const double epsilon = dp ? cfg.defense->resolve_epsilon(total_trees) : 0.0;
  const double clip_r = dp ? cfg.defense->clip_r : 0.0;

  Ensemble global;
  global.params = cfg.boost;
  global.n_classes = n_classes;
  MarginState margins(clients, cfg.boost, n_classes);
  std::vector<RoundLogEntry> log;

  for (int r = 0; r < cfg.rounds; ++r) {
    std::vector<std::vector<std::vector<double>>> probs(clients.size());
    for (std::size_t c = 0; c < clients.size(); ++c) probs[c] = margins.probabilities(c);
    std::vector<Tree> round_trees;
    for (int slot = 0; slot < k; ++slot) {
      const int tree_index = static_cast<int>(global.trees.size()) +
                             static_cast<int>(round_trees.size());
      // Per-client statistics for this tree, clipped when the defense is on.
      std::vector<std::vector<double>> g(clients.size()), h(clients.size());
      for (std::size_t c = 0; c < clients.size(); ++c) {
        stats_for_slot(clients[c], probs[c], slot, multi, g[c], h[c]);
        if (dp)
          for (std::size_t i = 0; i < g[c].size(); ++i)
            std::tie(g[c][i], h[c][i]) = clip_grad_hess(g[c][i], h[c][i], clip_r);
      }
      auto edges = merged_edges(clients, cfg.boost.n_bins);

      Tree tree;
      struct Pending {
        int node_id;
        std::vector<std::vector<std::size_t>> rows;  // per client
        int depth;
      };
      std::deque<Pending> queue;
      auto summed_histogram = [&](const std::vector<std::vector<std::size_t>>& rows,
                                  int node_id) {
        Histogram sum;
        for (std::size_t c = 0; c < clients.size(); ++c) {
          Histogram local = build_histogram(clients[c], rows[c], g[c], h[c], edges);
          if (dp) {
            Rng noise = Rng::substream(
                cfg.defense->seed,
                {kStreamDpNoise, static_cast<std::uint64_t>(c),
                 static_cast<std::uint64_t>(tree_index), static_cast<std::uint64_t>(node_id)});
            local = dp_histogram(local, epsilon, clip_r, noise);
          }
          if (sum.bins.empty())
            sum = std::move(local);
          else
            sum.add(local);
        }
        return sum;
      };

      {
        std::vector<std::vector<std::size_t>> rows(clients.size());
        for (std::size_t c = 0; c < clients.size(); ++c) rows[c] = all_indices(clients[c]);
        TreeNode root;
        tree.nodes.push_back(root);
        queue.push_back({0, std::move(rows), 0});
      }
      bool root_stats_set = false;
      while (!queue.empty()) {
        Pending cur = std::move(queue.front());
        queue.pop_front();
        Histogram hist = summed_histogram(cur.rows, cur.node_id);
        if (!root_stats_set && cur.node_id == 0) {
          tree.nodes[0].stats = hist.feature_total(0);
          root_stats_set = true;
        }
        std::optional<SplitCandidate> split;
        if (cur.depth < cfg.boost.max_depth)
          split = best_split(hist, cfg.boost.lambda, cfg.boost.gamma,
                             cfg.boost.min_child_hessian);
        if (!split) {
          TreeNode& n = tree.nodes[cur.node_id];
          n.is_leaf = true;
          double denom = n.stats->hess_sum + cfg.boost.lambda;
          n.leaf_value = std::fabs(denom) < 1e-12
                             ? 0.0
                             : -cfg.boost.learning_rate * n.stats->grad_sum / denom;
          continue;
        }
        std::vector<std::vector<std::size_t>> left_rows(clients.size()),
            right_rows(clients.size());
        for (std::size_t c = 0; c < clients.size(); ++c)
          for (auto i : cur.rows[c]) {
            if (clients[c].rows[i][split->feature] < split->threshold)
              left_rows[c].push_back(i);
            else
              right_rows[c].push_back(i);
          }
        TreeNode left_node, right_node;
        left_node.stats = split->left;
        right_node.stats = split->right;
        tree.nodes.push_back(left_node);
        int left_id = static_cast<int>(tree.nodes.size() - 1);
        tree.nodes.push_back(right_node);
        int right_id = static_cast<int>(tree.nodes.size() - 1);
        TreeNode& n = tree.nodes[cur.node_id];
        n.is_leaf = false;
        n.feature = split->feature;
        n.threshold = split->threshold;
        n.left = left_id;
        n.right = right_id;
        queue.push_back({left_id, std::move(left_rows), cur.depth + 1});
        queue.push_back({right_id, std::move(right_rows), cur.depth + 1});
      }
      tree.round = r;
      tree.class_index = multi ? slot : -1;
      round_trees.push_back(std::move(tree));
    }
    RoundLogEntry entry{
        r, cfg.protocol == Protocol::hardened_histogram ? "split_decisions" : "global_tree", {}};
    for (int slot = 0; slot < k; ++slot) {
      entry.tree_indices.push_back(static_cast<int>(global.trees.size()));
      global.trees.push_back(round_trees[slot]);
      margins.apply_tree(round_trees[slot], multi ? slot : 0);
    }
    log.push_back(std::move(entry));
  }

  Ensemble visible = global;
  if (cfg.protocol == Protocol::hardened_histogram)
    for (auto& t : visible.trees) t = t.without_stats();
  FedResult out;
  out.views = broadcast_views(cfg, visible, log);
  out.global = std::move(global);
  return out;
}

FedResult run_federated(const std::vector<Dataset>& clients, const FedConfig& cfg) {
  switch (cfg.protocol) {
    case Protocol::bagging: return run_bagging(clients, cfg);
    case Protocol::cyclic: return run_cyclic(clients, cfg);
    case Protocol::fedxgbllr: return run_fedxgbllr(clients, cfg);
    case Protocol::histogram:
    case Protocol::hardened_histogram: return run_histogram(clients, cfg);
  }
  throw ConfigError("unknown protocol");
}

}  // namespace fedgbdt
