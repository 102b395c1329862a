#include "fedgbdt/tabular.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fedgbdt/rng.hpp"

namespace fedgbdt {

void FeatureSchema::validate() const {
  std::set<std::string> names;
  for (const auto& f : features) {
    if (f.name.empty()) throw ConfigError("schema: empty feature name");
    if (!names.insert(f.name).second)
      throw ConfigError("schema: duplicate feature name '" + f.name + "'");
    if (f.kind == FeatureKind::categorical && f.categories.size() < 2)
      throw ConfigError("schema: categorical feature '" + f.name + "' needs >= 2 categories");
    if (f.kind == FeatureKind::numerical && !f.categories.empty())
      throw ConfigError("schema: numerical feature '" + f.name + "' lists categories");
  }
  if (names.count(label.name))
    throw ConfigError("schema: label name collides with a feature name");
  if (label.classes < 2) throw ConfigError("schema: label.classes must be >= 2");
}

void Dataset::validate() const {
  schema.validate();
  if (rows.size() != labels.size())
    throw ConfigError("dataset: row/label count mismatch");
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != schema.n_features())
      throw ConfigError("dataset: row width mismatch at row " + std::to_string(r));
    for (std::size_t f = 0; f < schema.n_features(); ++f) {
      const auto& spec = schema.features[f];
      if (spec.kind == FeatureKind::categorical) {
        double v = rows[r][f];
        if (v < 0 || v >= static_cast<double>(spec.categories.size()) ||
            v != std::floor(v))
          throw ConfigError("dataset: invalid category index in column '" + spec.name + "'");
      }
    }
    if (labels[r] < 0 || labels[r] >= schema.label.classes)
      throw ConfigError("dataset: label out of range at row " + std::to_string(r));
  }
}

Dataset Dataset::take(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.schema = schema;
  out.rows.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (auto i : indices) {
    out.rows.push_back(rows[i]);
    out.labels.push_back(labels[i]);
  }
  return out;
}

Dataset concat(const std::vector<Dataset>& parts) {
  if (parts.empty()) throw ConfigError("concat: no datasets");
  Dataset out;
  out.schema = parts.front().schema;
  for (const auto& p : parts) {
    out.rows.insert(out.rows.end(), p.rows.begin(), p.rows.end());
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
  }
  return out;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto res = std::from_chars(b, e, out);
  return res.ec == std::errc{} && res.ptr == e && std::isfinite(out);
}

// Splits one CSV record; handles double-quoted fields with embedded commas.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

double encode_value(const FeatureSchema& schema, std::size_t feature, const std::string& cell) {
  const auto& spec = schema.features.at(feature);
  if (spec.kind == FeatureKind::numerical) {
    double v;
    if (!parse_double(cell, v))
      throw ConfigError("unparseable numerical value '" + cell + "' in column " + spec.name);
    return v;
  }
  auto it = std::find(spec.categories.begin(), spec.categories.end(), cell);
  if (it == spec.categories.end())
    throw ConfigError("unknown category '" + cell + "' in column " + spec.name);
  return static_cast<double>(it - spec.categories.begin());
}

std::string decode_value(const FeatureSchema& schema, std::size_t feature, double value) {
  const auto& spec = schema.features.at(feature);
  if (spec.kind == FeatureKind::numerical) return format_double(value);
  auto idx = static_cast<std::size_t>(value);
  if (value != std::floor(value) || idx >= spec.categories.size())
    throw ConfigError("invalid category index for column " + spec.name);
  return spec.categories[idx];
}

int encode_label(const FeatureSchema& schema, const std::string& cell) {
  double v;
  if (!parse_double(cell, v) || v != std::floor(v) || v < 0 ||
      v >= static_cast<double>(schema.label.classes))
    throw ConfigError("invalid label '" + cell + "'");
  return static_cast<int>(v);
}

Dataset parse_csv(const std::string& text, const FeatureSchema& schema, MissingPolicy policy) {
  schema.validate();
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw ConfigError("csv: empty file");
  auto header = split_csv_line(line);

  // Locate the label column, then require the remaining columns to be the
  // schema's features in schema order.
  std::size_t label_col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == schema.label.name) label_col = i;
  if (label_col == header.size())
    throw ConfigError("csv: label column '" + schema.label.name + "' not found");
  std::vector<std::size_t> feature_cols;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (i != label_col) feature_cols.push_back(i);
  if (feature_cols.size() != schema.n_features())
    throw ConfigError("csv: header has " + std::to_string(feature_cols.size()) +
                      " feature columns, schema expects " + std::to_string(schema.n_features()));
  for (std::size_t f = 0; f < feature_cols.size(); ++f)
    if (header[feature_cols[f]] != schema.features[f].name)
      throw ConfigError("csv: header column '" + header[feature_cols[f]] +
                        "' does not match schema feature '" + schema.features[f].name + "'");

  Dataset data;
  data.schema = schema;
  // missing[r][f] marks cells to impute afterwards
  std::vector<std::vector<std::size_t>> missing_cells;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row_no;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ConfigError("csv: row " + std::to_string(row_no) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(header.size()));
    std::vector<double> row(schema.n_features(), 0.0);
    std::vector<std::size_t> missing;
    for (std::size_t f = 0; f < schema.n_features(); ++f) {
      const std::string& cell = cells[feature_cols[f]];
      bool bad = cell.empty();
      if (!bad) {
        try {
          row[f] = encode_value(schema, f, cell);
        } catch (const ConfigError&) {
          bad = true;
        }
      }
      if (bad) {
        if (policy == MissingPolicy::reject)
          throw ConfigError("missing value at row " + std::to_string(row_no) + ", column " +
                            schema.features[f].name);
        missing.push_back(f);
      }
    }
    data.labels.push_back(encode_label(schema, cells[label_col]));
    data.rows.push_back(std::move(row));
    missing_cells.push_back(std::move(missing));
  }
  if (data.rows.empty()) throw ConfigError("csv: no data rows");

  // Median / mode imputation over the observed cells.
  bool any_missing = false;
  for (const auto& m : missing_cells) any_missing |= !m.empty();
  if (any_missing) {
    std::vector<double> fill(schema.n_features(), 0.0);
    for (std::size_t f = 0; f < schema.n_features(); ++f) {
      std::vector<double> observed;
      for (std::size_t r = 0; r < data.rows.size(); ++r) {
        if (std::find(missing_cells[r].begin(), missing_cells[r].end(), f) ==
            missing_cells[r].end())
          observed.push_back(data.rows[r][f]);
      }
      if (observed.empty())
        throw ConfigError("csv: column " + schema.features[f].name + " has no observed values");
      if (schema.features[f].kind == FeatureKind::numerical) {
        std::sort(observed.begin(), observed.end());
        std::size_t n = observed.size();
        fill[f] = (n % 2 == 1) ? observed[n / 2]
                               : 0.5 * (observed[n / 2 - 1] + observed[n / 2]);
      } else {
        std::map<int, std::size_t> freq;
        for (double v : observed) ++freq[static_cast<int>(v)];
        int mode = 0;
        std::size_t best = 0;
        for (const auto& [k, c] : freq)
          if (c > best) best = c, mode = k;
        fill[f] = static_cast<double>(mode);
      }
    }
    for (std::size_t r = 0; r < data.rows.size(); ++r)
      for (auto f : missing_cells[r]) data.rows[r][f] = fill[f];
  }
  data.validate();
  return data;
}

Dataset load_csv(const std::string& path, const FeatureSchema& schema, MissingPolicy policy) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("csv: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), schema, policy);
}

std::string to_csv(const Dataset& data) {
  std::ostringstream out;
  for (std::size_t f = 0; f < data.schema.n_features(); ++f)
    out << data.schema.features[f].name << ',';
  out << data.schema.label.name << '\n';
  for (std::size_t r = 0; r < data.rows.size(); ++r) {
    for (std::size_t f = 0; f < data.schema.n_features(); ++f)
      out << decode_value(data.schema, f, data.rows[r][f]) << ',';
    out << data.labels[r] << '\n';
  }
  return out.str();
}

std::vector<Dataset> dirichlet_partition(const Dataset& data, int n_clients, double alpha,
                                         std::uint64_t seed) {
  data.validate();
  if (n_clients < 2) throw ConfigError("dirichlet_partition: n_clients must be >= 2");
  if (alpha <= 0.0) throw ConfigError("dirichlet_partition: alpha must be positive");
  if (static_cast<std::size_t>(n_clients) > data.size())
    throw ConfigError("dirichlet_partition: more clients than rows");

  std::vector<std::vector<std::size_t>> by_class(data.schema.label.classes);
  for (std::size_t r = 0; r < data.size(); ++r)
    by_class[data.labels[r]].push_back(r);

  const int kMaxAttempts = 1000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng = Rng::substream(seed, {kStreamPartition, static_cast<std::uint64_t>(attempt)});
    std::vector<std::vector<std::size_t>> assigned(n_clients);
    for (auto cls : by_class) {
      if (cls.empty()) continue;
      rng.shuffle(cls);
      auto props = rng.dirichlet(alpha, static_cast<std::size_t>(n_clients));
      // Largest-remainder rounding of proportional counts.
      std::size_t n = cls.size();
      std::vector<std::size_t> counts(n_clients);
      std::vector<std::pair<double, int>> rema;
      std::size_t total = 0;
      for (int c = 0; c < n_clients; ++c) {
        double exact = props[c] * static_cast<double>(n);
        counts[c] = static_cast<std::size_t>(std::floor(exact));
        total += counts[c];
        rema.push_back({exact - std::floor(exact), c});
      }
      std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      for (std::size_t k = 0; total < n; ++k, ++total) ++counts[rema[k % rema.size()].second];
      std::size_t pos = 0;
      for (int c = 0; c < n_clients; ++c)
        for (std::size_t k = 0; k < counts[c]; ++k) assigned[c].push_back(cls[pos++]);
    }
    bool ok = true;
    for (const auto& a : assigned) ok &= !a.empty();
    if (!ok) continue;
    std::vector<Dataset> out;
    out.reserve(n_clients);
    for (auto& a : assigned) {
      std::sort(a.begin(), a.end());
      out.push_back(data.take(a));
    }
    return out;
  }
  throw ConfigError("dirichlet_partition: could not give every client a row");
}

FeatureStats feature_stats(const Dataset& data) {
  if (data.rows.empty()) throw ConfigError("feature_stats: empty dataset");
  FeatureStats stats;
  stats.numeric.resize(data.schema.n_features());
  stats.frequencies.resize(data.schema.n_features());
  for (std::size_t f = 0; f < data.schema.n_features(); ++f) {
    if (data.schema.features[f].kind == FeatureKind::numerical) {
      NumericStats s;
      double sum = 0.0;
      s.min = data.rows[0][f];
      s.max = data.rows[0][f];
      for (const auto& row : data.rows) {
        sum += row[f];
        s.min = std::min(s.min, row[f]);
        s.max = std::max(s.max, row[f]);
      }
      s.mean = sum / static_cast<double>(data.size());
      double sq = 0.0;
      for (const auto& row : data.rows) {
        double d = row[f] - s.mean;
        sq += d * d;
      }
      s.stddev = std::sqrt(sq / static_cast<double>(data.size()));
      stats.numeric[f] = s;
    } else {
      for (const auto& row : data.rows) ++stats.frequencies[f][static_cast<int>(row[f])];
    }
  }
  return stats;
}

}  // namespace fedgbdt
