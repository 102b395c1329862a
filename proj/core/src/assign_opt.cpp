#include "fedgbdt/assign_opt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fedgbdt {

namespace {

constexpr double kEnumerationGuard = 1e6;
using Clock = std::chrono::steady_clock;

// Leaf-wise running sums with O(1) objective deltas per move.
class GroupSums {
 public:
  explicit GroupSums(const AssignmentProblem& p) : p_(&p) {
    g_.assign(p.leaves.size(), 0.0);
    h_.assign(p.leaves.size(), 0.0);
    objective_ = 0.0;
    for (std::size_t j = 0; j < p.leaves.size(); ++j) objective_ += term(j, 0.0, 0.0);
  }

  double term(std::size_t j, double g_extra, double h_extra) const {
    double dg = g_[j] + g_extra - p_->leaves[j].grad_target;
    double dh = h_[j] + h_extra - p_->leaves[j].hess_target;
    return dg * dg + dh * dh;
  }

  void add(std::size_t i, std::size_t j) {
    objective_ -= term(j, 0.0, 0.0);
    g_[j] += p_->samples[i].g;
    h_[j] += p_->samples[i].h;
    objective_ += term(j, 0.0, 0.0);
  }

  void remove(std::size_t i, std::size_t j) {
    objective_ -= term(j, 0.0, 0.0);
    g_[j] -= p_->samples[i].g;
    h_[j] -= p_->samples[i].h;
    objective_ += term(j, 0.0, 0.0);
  }

  double move_delta(std::size_t i, std::size_t from, std::size_t to) const {
    const auto& s = p_->samples[i];
    return term(from, -s.g, -s.h) - term(from, 0.0, 0.0) + term(to, s.g, s.h) -
           term(to, 0.0, 0.0);
  }

  // i currently in a, k currently in b; exchange their leaves.
  double swap_delta(std::size_t i, std::size_t a, std::size_t k, std::size_t b) const {
    const auto& si = p_->samples[i];
    const auto& sk = p_->samples[k];
    double dg = sk.g - si.g;
    double dh = sk.h - si.h;
    return term(a, dg, dh) - term(a, 0.0, 0.0) + term(b, -dg, -dh) - term(b, 0.0, 0.0);
  }

  double objective() const { return objective_; }
  double g(std::size_t j) const { return g_[j]; }
  double h(std::size_t j) const { return h_[j]; }
  double h_overfull_bound() const {
    double b = 0.0;
    for (std::size_t j = 0; j < h_.size(); ++j) {
      double over = h_[j] - p_->leaves[j].hess_target;
      if (over > 0.0) b += over * over;
    }
    return b;
  }

 private:
  const AssignmentProblem* p_;
  std::vector<double> g_, h_;
  double objective_;
};

}  // namespace

void AssignmentProblem::validate() const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.reachable.empty())
      throw std::invalid_argument("assignment: sample " + std::to_string(i) +
                                  " has no reachable leaf");
    if (!std::is_sorted(s.reachable.begin(), s.reachable.end()))
      throw std::invalid_argument("assignment: reachable sets must be sorted");
    for (int j : s.reachable)
      if (j < 0 || static_cast<std::size_t>(j) >= leaves.size())
        throw std::invalid_argument("assignment: reachable leaf id out of range");
    if (!std::isfinite(s.g) || !std::isfinite(s.h))
      throw std::invalid_argument("assignment: non-finite sample statistics");
  }
  for (const auto& l : leaves)
    if (!std::isfinite(l.grad_target) || !std::isfinite(l.hess_target))
      throw std::invalid_argument("assignment: non-finite leaf target");
}

std::optional<double> AssignmentProblem::enumeration_size() const {
  double prod = 1.0;
  for (const auto& s : samples) {
    prod *= static_cast<double>(s.reachable.size());
    if (prod > kEnumerationGuard) return std::nullopt;
  }
  return prod;
}

double assignment_objective(const AssignmentProblem& p, const std::vector<int>& leaf_of) {
  std::vector<double> g(p.leaves.size(), 0.0), h(p.leaves.size(), 0.0);
  for (std::size_t i = 0; i < leaf_of.size(); ++i) {
    g[leaf_of[i]] += p.samples[i].g;
    h[leaf_of[i]] += p.samples[i].h;
  }
  double obj = 0.0;
  for (std::size_t j = 0; j < p.leaves.size(); ++j) {
    double dg = g[j] - p.leaves[j].grad_target;
    double dh = h[j] - p.leaves[j].hess_target;
    obj += dg * dg + dh * dh;
  }
  return obj;
}

namespace {

// Shared exhaustive search. `order` gives the DFS variable order; the
// incumbent is replaced only on strict improvement, so the first optimum in
// scan order wins (lowest leaf ids for the natural order).
struct DfsSearch {
  const AssignmentProblem& p;
  const std::vector<std::size_t>& order;
  GroupSums sums;
  std::vector<int> current;
  std::vector<int> best;
  double best_obj;
  Clock::time_point deadline;
  bool use_deadline;
  bool aborted = false;
  std::size_t ticks = 0;

  DfsSearch(const AssignmentProblem& prob, const std::vector<std::size_t>& ord,
            std::vector<int> incumbent, double incumbent_obj, Clock::time_point dl,
            bool with_deadline)
      : p(prob),
        order(ord),
        sums(prob),
        current(prob.samples.size(), -1),
        best(std::move(incumbent)),
        best_obj(incumbent_obj),
        deadline(dl),
        use_deadline(with_deadline) {}

  void run(std::size_t depth) {
    if (aborted) return;
    if (use_deadline && (++ticks & 1023u) == 0 && Clock::now() > deadline) {
      aborted = true;
      return;
    }
    if (depth == order.size()) {
      double obj = sums.objective();
      if (obj < best_obj) {
        best_obj = obj;
        best = current;
      }
      return;
    }
    if (sums.h_overfull_bound() >= best_obj) return;
    std::size_t i = order[depth];
    for (int j : p.samples[i].reachable) {
      sums.add(i, j);
      current[i] = j;
      run(depth + 1);
      sums.remove(i, j);
      current[i] = -1;
      if (aborted) return;
    }
  }
};

std::vector<int> greedy_assignment(const AssignmentProblem& p, GroupSums& sums) {
  std::vector<std::size_t> order(p.samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(p.samples[a].h) > std::fabs(p.samples[b].h);
  });
  std::vector<int> leaf_of(p.samples.size(), -1);
  for (auto i : order) {
    int pick = -1;
    double best_deficit = -1.0;
    for (int j : p.samples[i].reachable) {
      double dg = p.leaves[j].grad_target - sums.g(j);
      double dh = p.leaves[j].hess_target - sums.h(j);
      double deficit = dg * dg + dh * dh;
      if (deficit > best_deficit) {
        best_deficit = deficit;
        pick = j;
      }
    }
    leaf_of[i] = pick;
    sums.add(i, pick);
  }
  return leaf_of;
}

}  // namespace

Assignment solve_brute_force(const AssignmentProblem& p) {
  p.validate();
  if (!p.enumeration_size())
    throw std::invalid_argument("solve_brute_force: search space exceeds the enumeration guard");
  std::vector<std::size_t> order(p.samples.size());
  std::iota(order.begin(), order.end(), 0);
  DfsSearch dfs(p, order, std::vector<int>(p.samples.size(), -1),
                std::numeric_limits<double>::infinity(), Clock::time_point{}, false);
  dfs.run(0);
  Assignment out;
  out.leaf_of = dfs.best;
  out.objective = dfs.best.empty() && !p.samples.empty() ? dfs.best_obj
                                                         : assignment_objective(p, dfs.best);
  out.status = SolveStatus::optimal;
  return out;
}

Assignment solve(const AssignmentProblem& p, double time_limit_s) {
  p.validate();
  const auto start = Clock::now();
  const auto deadline =
      start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(
                  std::max(0.0, time_limit_s)));
  auto expired = [&] { return Clock::now() > deadline; };

  GroupSums sums(p);
  std::vector<int> leaf_of = greedy_assignment(p, sums);
  Assignment out;
  out.leaf_of = leaf_of;
  out.status = SolveStatus::time_limited;

  const std::size_t n = p.samples.size();
  if (!expired()) {
    // Best-improvement descent. The cheap single-sample move neighborhood is
    // scanned every iteration; the quadratic swap neighborhood only at
    // move-local-optima.
    for (;;) {
      if (sums.objective() <= 0.0 || expired()) break;
      double best_delta = -1e-15;
      int move_i = -1, move_j = -1;
      for (std::size_t i = 0; i < n; ++i) {
        for (int j : p.samples[i].reachable) {
          if (j == leaf_of[i]) continue;
          double d = sums.move_delta(i, leaf_of[i], j);
          if (d < best_delta) {
            best_delta = d;
            move_i = static_cast<int>(i);
            move_j = j;
          }
        }
      }
      if (move_i >= 0) {
        sums.remove(move_i, leaf_of[move_i]);
        sums.add(move_i, move_j);
        leaf_of[move_i] = move_j;
        continue;
      }
      int swap_i = -1, swap_k = -1;
      std::size_t ticks = 0;
      bool clock_hit = false;
      for (std::size_t i = 0; i < n && !clock_hit; ++i) {
        for (std::size_t k = i + 1; k < n; ++k) {
          int a = leaf_of[i], b = leaf_of[k];
          if (a == b) continue;
          if (!std::binary_search(p.samples[i].reachable.begin(), p.samples[i].reachable.end(),
                                  b) ||
              !std::binary_search(p.samples[k].reachable.begin(), p.samples[k].reachable.end(),
                                  a))
            continue;
          double d = sums.swap_delta(i, a, k, b);
          if (d < best_delta) {
            best_delta = d;
            swap_i = static_cast<int>(i);
            swap_k = static_cast<int>(k);
          }
          if ((++ticks & 4095u) == 0 && expired()) {
            clock_hit = true;
            break;
          }
        }
      }
      if (clock_hit) break;
      if (swap_i < 0) break;  // local optimum for both neighborhoods
      int a = leaf_of[swap_i], b = leaf_of[swap_k];
      sums.remove(swap_i, a);
      sums.remove(swap_k, b);
      sums.add(swap_i, b);
      sums.add(swap_k, a);
      leaf_of[swap_i] = b;
      leaf_of[swap_k] = a;
    }
  }

  out.leaf_of = leaf_of;
  out.objective = assignment_objective(p, leaf_of);
  if (out.objective == 0.0) {
    out.status = SolveStatus::optimal;  // objective is non-negative, so zero is proven optimal
    return out;
  }

  if (!expired() && p.enumeration_size()) {
    // Exact refinement, most-constrained samples first.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return p.samples[a].reachable.size() < p.samples[b].reachable.size();
    });
    DfsSearch dfs(p, order, leaf_of, out.objective, deadline, true);
    dfs.run(0);
    if (!dfs.aborted) {
      out.leaf_of = dfs.best;
      out.objective = assignment_objective(p, dfs.best);
      out.status = SolveStatus::optimal;
      return out;
    }
    if (assignment_objective(p, dfs.best) < out.objective) {
      out.leaf_of = dfs.best;
      out.objective = assignment_objective(p, dfs.best);
    }
  }
  return out;
}

}  // namespace fedgbdt
