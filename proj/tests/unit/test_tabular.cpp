#include <doctest.h>

#include <map>
#include <set>

#include "fedgbdt/serialize.hpp"
#include "fedgbdt/tabular.hpp"
#include "fixtures.hpp"

using namespace fedgbdt;

namespace {

FeatureSchema csv_schema() {
  FeatureSchema schema;
  schema.features = {{"age", FeatureKind::numerical, {}},
                     {"bmi", FeatureKind::numerical, {}},
                     {"smoking", FeatureKind::categorical, {"never", "formerly", "smokes"}}};
  schema.label = {"label", 2};
  return schema;
}

}  // namespace

TEST_CASE("csv ingestion matches the schema") {
  auto schema = csv_schema();
  std::string text =
      "age,bmi,smoking,label\n"
      "30,25.5,never,0\n"
      "61,29,smokes,1\n";
  Dataset data = parse_csv(text, schema);
  REQUIRE(data.size() == 2);
  CHECK(data.rows[0][0] == 30.0);
  CHECK(data.rows[0][2] == 0.0);
  CHECK(data.rows[1][2] == 2.0);
  CHECK(data.labels[1] == 1);
}

TEST_CASE("csv loader parses the fig4-style fixture") {
  auto data = fixtures::fig4_dataset();
  std::string text = to_csv(data);
  Dataset reparsed = parse_csv(text, data.schema);
  REQUIRE(reparsed.size() == 15);
  CHECK(reparsed.rows == data.rows);
  CHECK(reparsed.labels == data.labels);
}

TEST_CASE("missing cell rejected under the reject policy") {
  auto schema = csv_schema();
  std::string text = "age,bmi,smoking,label\n30,,never,0\n";
  CHECK_THROWS_WITH_AS(parse_csv(text, schema), "missing value at row 1, column bmi",
                       ConfigError);
}

TEST_CASE("median imputation fills numerical holes with the column median") {
  auto schema = csv_schema();
  std::string text =
      "age,bmi,smoking,label\n"
      "30,20,never,0\n"
      "40,,never,0\n"
      "50,30,smokes,1\n"
      "60,24,formerly,1\n";
  Dataset data = parse_csv(text, schema, MissingPolicy::median_impute);
  CHECK(data.rows[1][1] == doctest::Approx(24.0));  // median of {20, 30, 24}
}

TEST_CASE("mode imputation fills categorical holes") {
  auto schema = csv_schema();
  std::string text =
      "age,bmi,smoking,label\n"
      "30,20,never,0\n"
      "40,21,,0\n"
      "50,30,never,1\n"
      "60,24,smokes,1\n";
  Dataset data = parse_csv(text, schema, MissingPolicy::median_impute);
  CHECK(data.rows[1][2] == 0.0);  // "never"
}

TEST_CASE("header mismatch and empty file are config errors") {
  auto schema = csv_schema();
  CHECK_THROWS_AS(parse_csv("", schema), ConfigError);
  CHECK_THROWS_AS(parse_csv("bmi,age,smoking,label\n1,2,never,0\n", schema), ConfigError);
  CHECK_THROWS_AS(parse_csv("age,bmi,label\n1,2,0\n", schema), ConfigError);
}

TEST_CASE("value encode/decode round-trips for every schema kind") {
  auto schema = csv_schema();
  Rng rng(42);
  for (int i = 0; i < 200; ++i) {
    double v = (rng.uniform() - 0.5) * 1000.0;
    double back = encode_value(schema, 0, decode_value(schema, 0, v));
    CHECK(back == v);
  }
  for (int c = 0; c < 3; ++c) {
    double enc = encode_value(schema, 2, schema.features[2].categories[c]);
    CHECK(enc == static_cast<double>(c));
    CHECK(decode_value(schema, 2, enc) == schema.features[2].categories[c]);
  }
}

TEST_CASE("dirichlet partition is exhaustive, disjoint and deterministic") {
  auto data = fixtures::synthetic_pima(300, 9);
  for (std::uint64_t seed : {1ull, 7ull, 99ull}) {
    auto parts = dirichlet_partition(data, 3, 0.3, seed);
    REQUIRE(parts.size() == 3);
    std::size_t total = 0;
    std::multiset<std::string> seen;
    for (const auto& p : parts) {
      CHECK(p.size() >= 1);
      total += p.size();
      for (std::size_t r = 0; r < p.size(); ++r) {
        std::string key;
        for (double v : p.rows[r]) key += std::to_string(v) + "|";
        key += std::to_string(p.labels[r]);
        seen.insert(key);
      }
    }
    CHECK(total == data.size());
    std::multiset<std::string> expected;
    for (std::size_t r = 0; r < data.size(); ++r) {
      std::string key;
      for (double v : data.rows[r]) key += std::to_string(v) + "|";
      key += std::to_string(data.labels[r]);
      expected.insert(key);
    }
    CHECK(seen == expected);

    // byte-for-byte determinism
    auto again = dirichlet_partition(data, 3, 0.3, seed);
    for (int c = 0; c < 3; ++c) CHECK(to_csv(parts[c]) == to_csv(again[c]));
  }
}

TEST_CASE("large alpha concentrates shares near 1/n_clients") {
  auto data = fixtures::synthetic_pima(900, 5);
  auto parts = dirichlet_partition(data, 3, 1e6, 21);
  std::map<int, std::size_t> class_total;
  for (std::size_t r = 0; r < data.size(); ++r) ++class_total[data.labels[r]];
  for (const auto& p : parts) {
    std::map<int, std::size_t> counts;
    for (int y : p.labels) ++counts[y];
    for (const auto& [cls, total] : class_total) {
      double share = static_cast<double>(counts[cls]) / static_cast<double>(total);
      CHECK(share == doctest::Approx(1.0 / 3.0).epsilon(0.10));
    }
  }
}

TEST_CASE("partition rejects more clients than rows") {
  auto data = fixtures::fig4_dataset();
  CHECK_THROWS_AS(dirichlet_partition(data, 16, 0.5, 1), ConfigError);
}

TEST_CASE("feature stats use population variance") {
  Dataset data;
  data.schema = fixtures::fig4_schema();
  data.rows = {{1.0, 5.0}, {3.0, 5.0}};
  data.labels = {0, 1};
  auto stats = feature_stats(data);
  CHECK(stats.numeric[0]->mean == doctest::Approx(2.0));
  CHECK(stats.numeric[0]->stddev == doctest::Approx(1.0));
  CHECK(stats.numeric[1]->stddev == doctest::Approx(0.0));
  CHECK(stats.numeric[0]->min == 1.0);
  CHECK(stats.numeric[0]->max == 3.0);
}

TEST_CASE("stroke-like glucose spread sits near the reference tolerance") {
  auto data = fixtures::synthetic_stroke(5000, 3);
  auto stats = feature_stats(data);
  double eps = 0.319 * stats.numeric[1]->stddev;
  CHECK(eps == doctest::Approx(17.03).epsilon(0.06));
}

TEST_CASE("schema json round-trip keeps the stable keys") {
  auto schema = fixtures::stroke_schema();
  std::string text = schema_to_json(schema);
  CHECK(text.find("\"features\"") != std::string::npos);
  CHECK(text.find("\"kind\"") != std::string::npos);
  CHECK(text.find("\"classes\"") != std::string::npos);
  FeatureSchema back = schema_from_json(text);
  CHECK(back == schema);
}
