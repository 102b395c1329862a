#include "fedgbdt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "fedgbdt/errors.hpp"

namespace fedgbdt {

namespace {
constexpr double kPadCost = 1e6;
constexpr double kToleranceFactor = 0.319;
}  // namespace

ToleranceSet tolerances_from(const FeatureStats& stats, const FeatureSchema& schema) {
  ToleranceSet tol;
  tol.eps.assign(schema.n_features(), 0.0);
  for (std::size_t f = 0; f < schema.n_features(); ++f)
    if (schema.features[f].kind == FeatureKind::numerical) {
      if (!stats.numeric[f]) throw EvalError("tolerances_from: missing numeric stats");
      tol.eps[f] = kToleranceFactor * stats.numeric[f]->stddev;
    }
  return tol;
}

double sample_ra(const ReconstructedSample& recon, const std::vector<double>& original_row,
                 int original_label, const FeatureSchema& schema, const ToleranceSet& tol,
                 const std::vector<bool>* feature_mask) {
  if (original_row.size() != schema.n_features())
    throw EvalError("sample_ra: row width does not match schema");
  int total = 0;
  int matches = 0;
  for (std::size_t f = 0; f < schema.n_features(); ++f) {
    if (feature_mask && !(*feature_mask)[f]) continue;
    ++total;
    if (schema.features[f].kind == FeatureKind::numerical) {
      const auto& iv = recon.box.intervals[f];
      double x = original_row[f];
      double eps = tol.eps[f];
      // closed-interval overlap so that zero-width boxes can match exactly
      if (std::max(iv.lo, x - eps) <= std::min(iv.hi, x + eps)) ++matches;
    } else {
      const auto& cands = recon.box.cat_candidates[f];
      if (std::binary_search(cands.begin(), cands.end(), static_cast<int>(original_row[f])))
        ++matches;
    }
  }
  ++total;  // the label counts as one categorical feature
  if (recon.label == original_label) ++matches;
  return static_cast<double>(matches) / static_cast<double>(total);
}

std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  if (n == 0) return {};
  for (const auto& row : cost) {
    if (static_cast<int>(row.size()) != n) throw EvalError("hungarian: matrix must be square");
    for (double v : row)
      if (!std::isfinite(v)) throw EvalError("hungarian: non-finite cost entry");
  }
  // Potentials + shortest augmenting path, 1-indexed internals.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] >= 1) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

namespace {

// Maximum bipartite matching (Hopcroft-Karp) over an adjacency list.
std::vector<int> max_bipartite_matching(const std::vector<std::vector<int>>& adj,
                                        std::size_t n_right) {
  const std::size_t n_left = adj.size();
  const int none = -1;
  std::vector<int> match_left(n_left, none), match_right(n_right, none);
  std::vector<int> dist(n_left);
  const int inf = std::numeric_limits<int>::max();

  auto bfs = [&] {
    std::vector<std::size_t> queue;
    for (std::size_t u = 0; u < n_left; ++u) {
      if (match_left[u] == none) {
        dist[u] = 0;
        queue.push_back(u);
      } else {
        dist[u] = inf;
      }
    }
    bool found = false;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      std::size_t u = queue[qi];
      for (int v : adj[u]) {
        int w = match_right[v];
        if (w == none) {
          found = true;
        } else if (dist[w] == inf) {
          dist[w] = dist[u] + 1;
          queue.push_back(static_cast<std::size_t>(w));
        }
      }
    }
    return found;
  };
  std::function<bool(std::size_t)> dfs = [&](std::size_t u) {
    for (int v : adj[u]) {
      int w = match_right[v];
      if (w == none || (dist[w] == dist[u] + 1 && dfs(static_cast<std::size_t>(w)))) {
        match_left[u] = v;
        match_right[v] = static_cast<int>(u);
        return true;
      }
    }
    dist[u] = inf;
    return false;
  };
  while (bfs()) {
    for (std::size_t u = 0; u < n_left; ++u)
      if (match_left[u] == none) dfs(u);
  }
  return match_left;
}

}  // namespace

MatchReport reconstruction_accuracy(const ReconstructedDataset& recon, const Dataset& original,
                                    const ToleranceSet& tol,
                                    const std::vector<bool>* feature_mask) {
  const std::size_t nr = recon.size();
  const std::size_t no = original.size();
  if (nr == 0 || no == 0) throw EvalError("reconstruction_accuracy: empty input");
  const FeatureSchema& schema = recon.schema;
  const std::size_t n = std::max(nr, no);
  auto pair_ra = [&](std::size_t i, std::size_t j) {
    return sample_ra(recon.samples[i], original.rows[j], original.labels[j], schema, tol,
                     feature_mask);
  };

  // Zero-cost fast path: a matching saturating min(nr, no) score-1 pairs is
  // provably optimal (every real pair at the per-pair minimum cost, pad
  // assignments structurally forced); otherwise fall back to the exact
  // Hungarian solve on the padded square matrix.
  std::vector<std::vector<int>> perfect(nr);
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t j = 0; j < no; ++j)
      if (pair_ra(i, j) == 1.0) perfect[i].push_back(static_cast<int>(j));
  std::vector<int> row_to_col = max_bipartite_matching(perfect, no);
  std::size_t saturated = 0;
  for (int v : row_to_col) saturated += v >= 0;
  if (saturated < std::min(nr, no)) {
    std::vector<std::vector<double>> cost(n, std::vector<double>(n, kPadCost));
    for (std::size_t i = 0; i < nr; ++i)
      for (std::size_t j = 0; j < no; ++j) cost[i][j] = 1.0 - pair_ra(i, j);
    row_to_col = hungarian(cost);
  }

  MatchReport report;
  report.pairing.assign(nr, -1);
  report.per_pair.assign(nr, -1.0);
  report.per_feature.assign(schema.n_features() + 1, 0.0);
  double sum = 0.0;
  std::size_t matched = 0;
  for (std::size_t i = 0; i < nr; ++i) {
    int j = row_to_col[i];
    if (j < 0 || static_cast<std::size_t>(j) >= no) continue;
    report.pairing[i] = j;
    double score = pair_ra(i, j);
    report.per_pair[i] = score;
    sum += score;
    ++matched;
    for (std::size_t f = 0; f < schema.n_features(); ++f) {
      const auto& s = recon.samples[i];
      bool match;
      if (schema.features[f].kind == FeatureKind::numerical) {
        double x = original.rows[j][f];
        double eps = tol.eps[f];
        match = std::max(s.box.intervals[f].lo, x - eps) <=
                std::min(s.box.intervals[f].hi, x + eps);
      } else {
        match = std::binary_search(s.box.cat_candidates[f].begin(),
                                   s.box.cat_candidates[f].end(),
                                   static_cast<int>(original.rows[j][f]));
      }
      if (match) report.per_feature[f] += 1.0;
    }
    if (recon.samples[i].label == original.labels[j])
      report.per_feature[schema.n_features()] += 1.0;
  }
  if (matched == 0) throw EvalError("reconstruction_accuracy: no real pairs matched");
  report.ra = sum / static_cast<double>(matched);
  for (auto& r : report.per_feature) r /= static_cast<double>(matched);
  return report;
}

std::vector<double> feature_importance_gain(const Ensemble& ens) {
  std::vector<double> importance;
  for (const auto& tree : ens.trees) {
    for (const auto& node : tree.nodes) {
      if (node.is_leaf) continue;
      if (importance.size() <= static_cast<std::size_t>(node.feature))
        importance.resize(node.feature + 1, 0.0);
      const auto& l = tree.nodes[node.left].stats;
      const auto& r = tree.nodes[node.right].stats;
      if (!l || !r) throw EvalError("feature_importance_gain: node statistics withheld");
      importance[node.feature] += split_gain(l->grad_sum, l->hess_sum, r->grad_sum, r->hess_sum,
                                             ens.params.lambda, ens.params.gamma);
    }
  }
  return importance;
}

MatchReport top_k_feature_ra(const ReconstructedDataset& recon, const Dataset& original,
                             const ToleranceSet& tol, const Ensemble& importance_source, int k) {
  const std::size_t nf = recon.schema.n_features();
  if (k < 1 || static_cast<std::size_t>(k) > nf + 1)
    throw EvalError("top_k_feature_ra: k out of range");
  auto importance = feature_importance_gain(importance_source);
  importance.resize(nf, 0.0);
  std::vector<std::size_t> order(nf);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return importance[a] > importance[b]; });
  std::vector<bool> mask(nf, false);
  for (int i = 0; i < k - 1 && static_cast<std::size_t>(i) < nf; ++i) mask[order[i]] = true;
  return reconstruction_accuracy(recon, original, tol, &mask);
}

namespace {

double binary_f1(const std::vector<int>& truth, const std::vector<int>& pred, int positive) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    bool t = truth[i] == positive;
    bool q = pred[i] == positive;
    tp += t && q;
    fp += !t && q;
    fn += t && !q;
  }
  if (tp == 0) return 0.0;
  double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

// Mann-Whitney rank statistic with average ranks for ties.
double rank_auc(const std::vector<double>& score, const std::vector<int>& is_positive) {
  std::size_t n = score.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
  std::vector<double> rank(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && score[order[j + 1]] == score[order[i]]) ++j;
    double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (is_positive[r]) {
      pos_rank_sum += rank[r];
      ++n_pos;
    }
  }
  std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw EvalError("utility_metrics: AUC undefined on a single-class test set");
  return (pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
         (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace

UtilityMetrics utility_metrics(const Ensemble& ens, const Dataset& test) {
  if (test.rows.empty()) throw EvalError("utility_metrics: empty test set");
  UtilityMetrics out;
  if (!ens.multiclass()) {
    std::vector<double> p(test.size());
    std::vector<int> pred(test.size());
    std::vector<int> pos(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
      p[i] = predict_proba(ens, test.rows[i]);
      pred[i] = p[i] >= 0.5 ? 1 : 0;
      pos[i] = test.labels[i] == 1;
    }
    out.auc = rank_auc(p, pos);
    out.f1 = binary_f1(test.labels, pred, 1);
    return out;
  }

  const int k = ens.n_classes;
  std::vector<std::vector<double>> probs(test.size());
  std::vector<int> pred(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    probs[i] = predict_probas(ens, test.rows[i]);
    pred[i] = static_cast<int>(std::max_element(probs[i].begin(), probs[i].end()) -
                               probs[i].begin());
  }
  double f1_sum = 0.0, auc_sum = 0.0;
  int f1_terms = 0, auc_terms = 0;
  for (int c = 0; c < k; ++c) {
    bool present = false, absent = false;
    for (int y : test.labels) (y == c ? present : absent) = true;
    if (!present) continue;
    f1_sum += binary_f1(test.labels, pred, c);
    ++f1_terms;
    if (absent) {
      std::vector<double> score(test.size());
      std::vector<int> pos(test.size());
      for (std::size_t i = 0; i < test.size(); ++i) {
        score[i] = probs[i][c];
        pos[i] = test.labels[i] == c;
      }
      auc_sum += rank_auc(score, pos);
      ++auc_terms;
    }
  }
  if (auc_terms == 0) throw EvalError("utility_metrics: AUC undefined on a single-class test set");
  out.f1 = f1_sum / static_cast<double>(f1_terms);
  out.auc = auc_sum / static_cast<double>(auc_terms);
  return out;
}

}  // namespace fedgbdt
