#pragma once

#include <vector>

#include "fedgbdt/gbdt.hpp"
#include "fedgbdt/recon.hpp"
#include "fedgbdt/tabular.hpp"

namespace fedgbdt {

// Per-feature match tolerances; eps[f] is used for numerical features,
// categorical features (and the label) require exact membership.
struct ToleranceSet {
  std::vector<double> eps;
};

struct MatchReport {
  double ra = 0.0;
  std::vector<int> pairing;         // reconstructed index -> original index, -1 unmatched
  std::vector<double> per_pair;     // ra per matched reconstructed sample
  std::vector<double> per_feature;  // match rate per feature, label appended last
};

// eps_f = 0.319 * sigma_f per numerical feature.
ToleranceSet tolerances_from(const FeatureStats& stats, const FeatureSchema& schema);

// Fraction of features (label included) whose reconstructed range or
// candidate set overlaps the original value within tolerance. feature_mask,
// when given, restricts scoring to the masked features plus the label.
double sample_ra(const ReconstructedSample& recon, const std::vector<double>& original_row,
                 int original_label, const FeatureSchema& schema, const ToleranceSet& tol,
                 const std::vector<bool>* feature_mask = nullptr);

// Exact minimum-cost perfect matching on a square cost matrix; returns the
// column assigned to each row. Throws EvalError on non-finite entries.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost);

MatchReport reconstruction_accuracy(const ReconstructedDataset& recon, const Dataset& original,
                                    const ToleranceSet& tol,
                                    const std::vector<bool>* feature_mask = nullptr);

// Cumulative split gain per feature over the ensemble (requires node stats).
std::vector<double> feature_importance_gain(const Ensemble& ens);

// Reconstruction accuracy restricted to the top k-1 features by gain
// importance, plus the label. k = n_features + 1 reproduces the full RA.
MatchReport top_k_feature_ra(const ReconstructedDataset& recon, const Dataset& original,
                             const ToleranceSet& tol, const Ensemble& importance_source, int k);

struct UtilityMetrics {
  double f1 = 0.0;
  double auc = 0.0;
};

// F1 at threshold 0.5 and rank-statistic AUC; macro-averaged one-vs-rest for
// multiclass. Throws EvalError when AUC is undefined (single-class test set).
UtilityMetrics utility_metrics(const Ensemble& ens, const Dataset& test);

}  // namespace fedgbdt
