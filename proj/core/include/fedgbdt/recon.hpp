#pragma once

#include <limits>
#include <vector>

#include "fedgbdt/gbdt.hpp"
#include "fedgbdt/tabular.hpp"

namespace fedgbdt {

// Per-sample conjunction of feature constraints accumulated from tree paths.
// Numerical features carry a half-open interval [lo, hi) matching the routing
// rule (value < threshold goes left); categorical features carry the sorted
// candidate index set (full set = unconstrained). Boxes only shrink.
struct FeatureBox {
  struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
  };

  std::vector<Interval> intervals;              // numerical slots
  std::vector<std::vector<int>> cat_candidates; // categorical slots

  static FeatureBox unconstrained(const FeatureSchema& schema);
  // Intersects with one split predicate; returns false if the result is empty.
  bool restrict(const FeatureSchema& schema, int feature, double threshold, bool left_branch);
  bool intersect(const FeatureSchema& schema, const FeatureBox& other);
  bool contains(const FeatureSchema& schema, const std::vector<double>& row) const;
  bool subset_of(const FeatureSchema& schema, const FeatureBox& other) const;
  double midpoint(const FeatureSchema& schema, std::size_t feature, double clamp_lo,
                  double clamp_hi) const;
};

struct ReconstructedSample {
  FeatureBox box;
  int label = 0;
  // Accumulated leaf-value sums per class (size 1 for binary); the base score
  // is added when probabilities are refreshed.
  std::vector<double> margin_acc;
  std::vector<double> p, g, h;  // refreshed statistics, size = margin_acc
  int origin_leaf = -1;         // leaf id in the victim's first tree
};

struct ReconstructedDataset {
  std::vector<ReconstructedSample> samples;
  int victim = -1;  // -1 = "global"
  BoostParams source_params;
  FeatureSchema schema;
  FeatureStats attacker_bounds;  // adversary's own-data ranges, for CSV export

  std::size_t size() const { return samples.size(); }
};

}  // namespace fedgbdt
