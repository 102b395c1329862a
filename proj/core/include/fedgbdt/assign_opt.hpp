#pragma once

#include <optional>
#include <string>
#include <vector>

namespace fedgbdt {

enum class SolveStatus { optimal, time_limited };

// Per-tree sample-to-leaf assignment: binary choice per sample restricted to
// its reachable leaf set, minimizing
//   sum_j (sum_{i->j} g_i - G_j)^2 + (sum_{i->j} h_i - H_j)^2.
struct AssignmentProblem {
  struct Sample {
    double g = 0.0;
    double h = 0.0;
    std::vector<int> reachable;  // sorted ascending, non-empty
  };
  struct Leaf {
    double grad_target = 0.0;
    double hess_target = 0.0;
  };

  std::vector<Sample> samples;
  std::vector<Leaf> leaves;

  void validate() const;
  // Product of |L_i|, or nullopt once it exceeds the enumeration guard (1e6).
  std::optional<double> enumeration_size() const;
};

struct Assignment {
  std::vector<int> leaf_of;
  double objective = 0.0;
  SolveStatus status = SolveStatus::optimal;
};

double assignment_objective(const AssignmentProblem& p, const std::vector<int>& leaf_of);

// Exact optimum by exhaustive enumeration; requires the enumeration guard.
Assignment solve_brute_force(const AssignmentProblem& p);

// Anytime search: greedy seed, best-improvement single-sample moves and
// pairwise swaps, then exact branch-and-bound refinement when the instance
// fits the enumeration guard and time remains. time_limit_s = 0 returns the
// greedy assignment.
Assignment solve(const AssignmentProblem& p, double time_limit_s = 600.0);

}  // namespace fedgbdt
