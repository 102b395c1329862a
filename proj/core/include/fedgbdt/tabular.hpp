#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedgbdt/errors.hpp"

namespace fedgbdt {

enum class FeatureKind { numerical, categorical };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::numerical;
  std::vector<std::string> categories;  // categorical only, ordered

  bool operator==(const FeatureSpec&) const = default;
};

struct LabelSpec {
  std::string name;
  int classes = 2;

  bool operator==(const LabelSpec&) const = default;
};

struct FeatureSchema {
  std::vector<FeatureSpec> features;
  LabelSpec label;

  std::size_t n_features() const { return features.size(); }
  bool multiclass() const { return label.classes > 2; }
  bool operator==(const FeatureSchema&) const = default;
  // Throws ConfigError on duplicate names, <2 categories, or <2 classes.
  void validate() const;
};

// Tabular samples with all feature values encoded as reals; categorical
// values are the integer index into the schema's category list.
struct Dataset {
  FeatureSchema schema;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;

  std::size_t size() const { return rows.size(); }
  void validate() const;
  Dataset take(const std::vector<std::size_t>& indices) const;
};

// Concatenates client shards that share a schema (global reconstruction target).
Dataset concat(const std::vector<Dataset>& parts);

struct NumericStats {
  double mean = 0.0;
  double stddev = 0.0;  // population, divisor n
  double min = 0.0;
  double max = 0.0;
};

struct FeatureStats {
  // Index-aligned with the schema: numeric[f] set for numerical features,
  // frequencies[f] populated for categorical features.
  std::vector<std::optional<NumericStats>> numeric;
  std::vector<std::map<int, std::size_t>> frequencies;
};

enum class MissingPolicy { reject, median_impute };

// Value-level encode/decode against the schema.
double encode_value(const FeatureSchema& schema, std::size_t feature, const std::string& cell);
std::string decode_value(const FeatureSchema& schema, std::size_t feature, double value);
int encode_label(const FeatureSchema& schema, const std::string& cell);

// CSV ingestion. The header must contain the label column (by name) and the
// schema's features in schema order. Empty or (under median_impute) otherwise
// unparseable cells are imputed by column median / modal category.
Dataset load_csv(const std::string& path, const FeatureSchema& schema,
                 MissingPolicy policy = MissingPolicy::reject);
Dataset parse_csv(const std::string& text, const FeatureSchema& schema,
                  MissingPolicy policy = MissingPolicy::reject);
std::string to_csv(const Dataset& data);

// Non-IID split: per-class allocation across clients drawn from
// Dirichlet(alpha), resampled until every client holds at least one row.
// Deterministic given (data, n_clients, alpha, seed).
std::vector<Dataset> dirichlet_partition(const Dataset& data, int n_clients, double alpha,
                                         std::uint64_t seed);

FeatureStats feature_stats(const Dataset& data);

}  // namespace fedgbdt
