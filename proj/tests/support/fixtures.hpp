#pragma once

// Shared synthetic datasets and fixtures for the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedgbdt/assign_opt.hpp"
#include "fedgbdt/attack.hpp"
#include "fedgbdt/gbdt.hpp"
#include "fedgbdt/rng.hpp"
#include "fedgbdt/tabular.hpp"

namespace fixtures {

using namespace fedgbdt;

// 15-row two-feature fixture: seven young label-0 rows, four older low-BMI
// label-1 rows, four older high-BMI rows with labels {1,0,0,0}. With
// lambda=1, learning_rate=0.3, base_score=0.5 and depth 2 the trainer splits
// at age 60 then BMI 29 and produces leaf values -0.381818 / 0.3 / -0.15.
inline FeatureSchema fig4_schema() {
  FeatureSchema schema;
  schema.features = {{"age", FeatureKind::numerical, {}}, {"bmi", FeatureKind::numerical, {}}};
  schema.label = {"label", 2};
  return schema;
}

inline Dataset fig4_dataset() {
  Dataset data;
  data.schema = fig4_schema();
  auto add = [&](double age, double bmi, int label) {
    data.rows.push_back({age, bmi});
    data.labels.push_back(label);
  };
  add(30, 25, 0);
  add(35, 22, 0);
  add(40, 31, 0);
  add(45, 27, 0);
  add(50, 33, 0);
  add(52, 24, 0);
  add(55, 28, 0);
  add(60, 22, 1);
  add(65, 24, 1);
  add(70, 26, 1);
  add(75, 28, 1);
  add(61, 35, 1);
  add(62, 29, 0);
  add(68, 31, 0);
  add(72, 33, 0);
  return data;
}

inline BoostParams fig4_params() {
  BoostParams p;
  p.n_trees = 1;
  p.max_depth = 2;
  p.learning_rate = 0.3;
  p.lambda = 1.0;
  p.gamma = 0.0;
  p.base_score = 0.5;
  p.n_bins = 32;
  return p;
}

// Random numerical dataset with label-dependent feature shifts; every
// feature carries some signal so shallow trees find splits.
inline Dataset random_dataset(std::uint64_t seed, std::size_t rows, std::size_t features,
                              int classes = 2) {
  Rng rng = Rng::substream(seed, {kStreamFixture, rows, features});
  Dataset data;
  for (std::size_t f = 0; f < features; ++f)
    data.schema.features.push_back({"f" + std::to_string(f), FeatureKind::numerical, {}});
  data.schema.label = {"y", classes};
  for (std::size_t r = 0; r < rows; ++r) {
    int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
    std::vector<double> row(features);
    for (std::size_t f = 0; f < features; ++f)
      row[f] = rng.normal() * 2.0 + 3.0 * static_cast<double>((y + f) % classes);
    data.rows.push_back(std::move(row));
    data.labels.push_back(y);
  }
  // ensure every class is present
  for (int c = 0; c < classes; ++c) data.labels[c % rows] = c;
  return data;
}

// 8 numerical features + binary outcome shaped like a small diabetes table;
// class-conditional shifts keep the task learnable.
inline FeatureSchema pima_schema() {
  FeatureSchema schema;
  for (const char* name : {"pregnancies", "glucose", "blood_pressure", "skin_thickness",
                           "insulin", "bmi", "pedigree", "age"})
    schema.features.push_back({name, FeatureKind::numerical, {}});
  schema.label = {"outcome", 2};
  return schema;
}

inline Dataset synthetic_pima(std::size_t rows, std::uint64_t seed) {
  Rng rng = Rng::substream(seed, {kStreamFixture, 101});
  Dataset data;
  data.schema = pima_schema();
  for (std::size_t r = 0; r < rows; ++r) {
    int y = rng.uniform() < 0.35 ? 1 : 0;
    double preg = std::clamp(std::round(std::fabs(rng.normal() * 3.2 + 3.5 + 1.2 * y)), 0.0, 17.0);
    double glucose = std::max(40.0, rng.normal() * (y ? 30.0 : 25.0) + (y ? 142.0 : 110.0));
    double bp = std::max(30.0, rng.normal() * 12.0 + 70.0 + 4.0 * y);
    double skin = std::max(0.0, rng.normal() * 11.0 + 23.0 + 4.0 * y);
    double insulin = std::max(0.0, rng.normal() * 80.0 + 95.0 + 45.0 * y);
    double bmi = std::max(15.0, rng.normal() * (y ? 6.5 : 7.0) + (y ? 35.5 : 30.0));
    double pedigree = std::clamp(std::fabs(rng.normal() * 0.3 + 0.42 + 0.12 * y), 0.05, 2.5);
    double age = std::max(21.0, rng.normal() * (y ? 11.0 : 10.0) + (y ? 42.0 : 31.0));
    data.rows.push_back({preg, glucose, bp, skin, insulin, bmi, pedigree, age});
    data.labels.push_back(y);
  }
  data.labels[0] = 0;
  data.labels[1] = 1;
  return data;
}

// 3 numerical + 7 categorical features with a binary label, shaped like a
// balanced stroke-risk table.
inline FeatureSchema stroke_schema() {
  FeatureSchema schema;
  schema.features = {
      {"age", FeatureKind::numerical, {}},
      {"avg_glucose", FeatureKind::numerical, {}},
      {"bmi", FeatureKind::numerical, {}},
      {"gender", FeatureKind::categorical, {"female", "male", "other"}},
      {"hypertension", FeatureKind::categorical, {"no", "yes"}},
      {"heart_disease", FeatureKind::categorical, {"no", "yes"}},
      {"ever_married", FeatureKind::categorical, {"no", "yes"}},
      {"work_type", FeatureKind::categorical,
       {"children", "govt_job", "never_worked", "private", "self_employed"}},
      {"residence", FeatureKind::categorical, {"rural", "urban"}},
      {"smoking", FeatureKind::categorical, {"never", "formerly", "smokes", "unknown"}},
  };
  schema.label = {"stroke", 2};
  return schema;
}

inline Dataset synthetic_stroke(std::size_t rows, std::uint64_t seed) {
  Rng rng = Rng::substream(seed, {kStreamFixture, 202});
  Dataset data;
  data.schema = stroke_schema();
  auto pick = [&](const std::vector<double>& weights) {
    double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return static_cast<double>(i);
    }
    return static_cast<double>(weights.size() - 1);
  };
  for (std::size_t r = 0; r < rows; ++r) {
    int y = rng.uniform() < 0.5 ? 1 : 0;
    double age = std::clamp(rng.normal() * 14.0 + (y ? 64.0 : 40.0), 1.0, 95.0);
    double glucose = std::max(50.0, rng.normal() * (y ? 50.0 : 34.0) + (y ? 168.0 : 103.0));
    double bmi = std::clamp(rng.normal() * 7.0 + (y ? 31.0 : 28.0), 12.0, 60.0);
    double gender = pick({0.55, 0.44, 0.01});
    double hyper = rng.uniform() < (y ? 0.35 : 0.10) ? 1.0 : 0.0;
    double heart = rng.uniform() < (y ? 0.25 : 0.05) ? 1.0 : 0.0;
    double married = rng.uniform() < (age > 28 ? 0.8 : 0.2) ? 1.0 : 0.0;
    double work = pick(age < 18 ? std::vector<double>{0.9, 0.02, 0.03, 0.03, 0.02}
                                : std::vector<double>{0.01, 0.15, 0.02, 0.60, 0.22});
    double residence = pick({0.49, 0.51});
    double smoking = pick(y ? std::vector<double>{0.35, 0.25, 0.25, 0.15}
                            : std::vector<double>{0.55, 0.15, 0.12, 0.18});
    data.rows.push_back(
        {age, glucose, bmi, gender, hyper, heart, married, work, residence, smoking});
    data.labels.push_back(y);
  }
  data.labels[0] = 0;
  data.labels[1] = 1;
  return data;
}

// Second-tree assignment instance exactly as the reconstruction builds it:
// probe the first tree, derive boxed reachability, target the second tree's
// exact leaf statistics. Returns nullopt when the instance falls outside the
// exact-refinement enumeration guard.
inline std::optional<AssignmentProblem> attack_style_instance(std::uint64_t seed,
                                                              std::size_t rows,
                                                              std::size_t features) {
  auto data = random_dataset(7000 + seed, rows, features);
  BoostParams params;
  params.n_trees = 2;
  params.max_depth = 2;
  Ensemble ens = train_ensemble(data, params);
  const Tree& first = ens.trees.at(0);
  const Tree& second = ens.trees.at(1);
  auto counts = infer_leaf_counts(first, params.base_score);
  auto labels = infer_label_distribution(first, counts, params.learning_rate, params.lambda,
                                         params.base_score);
  auto recon = init_dataset(first, counts, labels, data.schema, feature_stats(data), params);
  update_sample_stats(recon, 2);

  AssignmentProblem p;
  std::map<int, int> dense;
  for (int leaf : second.leaf_ids()) {
    dense[leaf] = static_cast<int>(p.leaves.size());
    p.leaves.push_back(
        {second.nodes[leaf].stats->grad_sum, second.nodes[leaf].stats->hess_sum});
  }
  for (const auto& s : recon.samples) {
    AssignmentProblem::Sample ps;
    ps.g = s.g[0];
    ps.h = s.h[0];
    for (int leaf : reachable_leaves(s.box, second, data.schema))
      ps.reachable.push_back(dense[leaf]);
    p.samples.push_back(std::move(ps));
  }
  if (!p.enumeration_size()) return std::nullopt;
  return p;
}

// Client shards with well-separated sizes and feature ranges, for chain
// identification fixtures.
inline std::vector<Dataset> separated_clients(const std::vector<std::size_t>& sizes,
                                              std::uint64_t seed) {
  std::vector<Dataset> out;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    Rng rng = Rng::substream(seed, {kStreamFixture, 303, c});
    Dataset data;
    data.schema = fig4_schema();
    for (std::size_t r = 0; r < sizes[c]; ++r) {
      double age = rng.normal() * 6.0 + 30.0 + 25.0 * static_cast<double>(c);
      double bmi = rng.normal() * 4.0 + 22.0 + 6.0 * static_cast<double>(c);
      int y = (age + bmi * 0.5 + rng.normal() * 5.0) >
                      (30.0 + 25.0 * static_cast<double>(c) + 11.0 + 3.0 * static_cast<double>(c))
                  ? 1
                  : 0;
      data.rows.push_back({age, bmi});
      data.labels.push_back(y);
    }
    data.labels[0] = 0;
    data.labels[1] = 1;
    out.push_back(std::move(data));
  }
  return out;
}

}  // namespace fixtures
