#include "fedgbdt/defense.hpp"

#include <algorithm>

#include "fedgbdt/errors.hpp"

namespace fedgbdt {

void DPConfig::validate() const {
  if (epsilon_total.has_value() == epsilon_histogram.has_value())
    throw ConfigError("defense: exactly one of epsilon_total / epsilon_histogram must be set");
  if (epsilon_total && *epsilon_total <= 0.0)
    throw ConfigError("defense: epsilon_total must be positive");
  if (epsilon_histogram && *epsilon_histogram <= 0.0)
    throw ConfigError("defense: epsilon_histogram must be positive");
  if (clip_r <= 0.0) throw ConfigError("defense: clip_r must be positive");
}

double DPConfig::resolve_epsilon(int n_trees) const {
  validate();
  if (epsilon_histogram) return *epsilon_histogram;
  return split_budget(*epsilon_total, n_trees);
}

double split_budget(double epsilon_total, int n_trees) {
  if (n_trees < 1) throw ConfigError("split_budget: tree count must be >= 1");
  return epsilon_total / (2.0 * static_cast<double>(n_trees));
}

std::pair<double, double> clip_grad_hess(double g, double h, double r) {
  if (r <= 0.0) throw ConfigError("clip_grad_hess: clip threshold must be positive");
  return {std::clamp(g, -r, r), std::clamp(h, 0.0, 2.0 * r)};
}

Histogram dp_histogram(const Histogram& hist, double epsilon_histogram, double clip_r, Rng& rng) {
  if (epsilon_histogram <= 0.0) throw ConfigError("dp_histogram: epsilon must be positive");
  const double scale = 2.0 * clip_r / epsilon_histogram;
  Histogram out = hist;
  for (auto& feature_bins : out.bins) {
    for (auto& bin : feature_bins) {
      bin.grad_sum += rng.laplace(scale);
      bin.hess_sum += rng.laplace(scale);
    }
  }
  return out;
}

}  // namespace fedgbdt
