#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "fedgbdt/gbdt.hpp"
#include "fedgbdt/rng.hpp"

namespace fedgbdt {

// Per-histogram epsilon-DP for shared gradient/Hessian histograms.
struct DPConfig {
  std::optional<double> epsilon_total;
  std::optional<double> epsilon_histogram;
  double clip_r = 1.0;
  std::uint64_t seed = 0;

  void validate() const;                      // exactly one budget form, positive values
  double resolve_epsilon(int n_trees) const;  // per-histogram budget
};

// epsilon_total split over 2T shared histograms.
double split_budget(double epsilon_total, int n_trees);

// g clipped to [-r, r], h to [0, 2r].
std::pair<double, double> clip_grad_hess(double g, double h, double r);

// Adds independent Laplace(0, 2r/epsilon) noise to every (G, H) bin entry.
Histogram dp_histogram(const Histogram& hist, double epsilon_histogram, double clip_r, Rng& rng);

}  // namespace fedgbdt
