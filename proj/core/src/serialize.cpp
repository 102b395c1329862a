#include "fedgbdt/serialize.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "fedgbdt/errors.hpp"

namespace fedgbdt {

using nlohmann::json;

namespace {

json params_to_json(const BoostParams& p) {
  return json{{"n_trees", p.n_trees},
              {"max_depth", p.max_depth},
              {"learning_rate", p.learning_rate},
              {"lambda", p.lambda},
              {"gamma", p.gamma},
              {"base_score", p.base_score},
              {"n_bins", p.n_bins},
              {"min_child_hessian", p.min_child_hessian}};
}

BoostParams params_from_json(const json& j) {
  BoostParams p;
  p.n_trees = j.value("n_trees", p.n_trees);
  p.max_depth = j.value("max_depth", p.max_depth);
  p.learning_rate = j.value("learning_rate", p.learning_rate);
  p.lambda = j.value("lambda", p.lambda);
  p.gamma = j.value("gamma", p.gamma);
  p.base_score = j.value("base_score", p.base_score);
  p.n_bins = j.value("n_bins", p.n_bins);
  p.min_child_hessian = j.value("min_child_hessian", p.min_child_hessian);
  return p;
}

json tree_to_json(const Tree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) {
    json jn;
    jn["kind"] = n.is_leaf ? "leaf" : "split";
    if (n.is_leaf) {
      jn["leaf_value"] = n.leaf_value;
    } else {
      jn["feature"] = n.feature;
      jn["threshold"] = n.threshold;
      jn["left"] = n.left;
      jn["right"] = n.right;
    }
    if (n.stats) {
      jn["G"] = n.stats->grad_sum;
      jn["H"] = n.stats->hess_sum;
    }
    nodes.push_back(std::move(jn));
  }
  json jt;
  jt["client_id"] = t.client_id;
  jt["round"] = t.round;
  jt["class_index"] = t.class_index;
  jt["nodes"] = std::move(nodes);
  return jt;
}

Tree tree_from_json(const json& jt) {
  Tree t;
  t.client_id = jt.value("client_id", -1);
  t.round = jt.value("round", -1);
  t.class_index = jt.value("class_index", -1);
  for (const auto& jn : jt.at("nodes")) {
    TreeNode n;
    n.is_leaf = jn.at("kind").get<std::string>() == "leaf";
    if (n.is_leaf) {
      n.leaf_value = jn.at("leaf_value").get<double>();
    } else {
      n.feature = jn.at("feature").get<int>();
      n.threshold = jn.at("threshold").get<double>();
      n.left = jn.at("left").get<int>();
      n.right = jn.at("right").get<int>();
    }
    if (jn.contains("G")) n.stats = NodeStats{jn.at("G").get<double>(), jn.at("H").get<double>()};
    t.nodes.push_back(std::move(n));
  }
  return t;
}

json ensemble_to_json_obj(const Ensemble& ens) {
  json trees = json::array();
  for (const auto& t : ens.trees) trees.push_back(tree_to_json(t));
  return json{{"params", params_to_json(ens.params)},
              {"n_classes", ens.n_classes},
              {"trees", std::move(trees)}};
}

Ensemble ensemble_from_json_obj(const json& j) {
  Ensemble ens;
  ens.params = params_from_json(j.at("params"));
  ens.n_classes = j.value("n_classes", 2);
  for (const auto& jt : j.at("trees")) ens.trees.push_back(tree_from_json(jt));
  return ens;
}

json box_to_json(const FeatureBox& box, const FeatureSchema& schema) {
  json features = json::array();
  for (std::size_t f = 0; f < schema.n_features(); ++f) {
    json jf;
    jf["name"] = schema.features[f].name;
    if (schema.features[f].kind == FeatureKind::numerical) {
      if (std::isfinite(box.intervals[f].lo)) jf["lo"] = box.intervals[f].lo;
      if (std::isfinite(box.intervals[f].hi)) jf["hi"] = box.intervals[f].hi;
    } else {
      jf["candidates"] = box.cat_candidates[f];
    }
    features.push_back(std::move(jf));
  }
  return features;
}

FeatureBox box_from_json(const json& j, const FeatureSchema& schema) {
  FeatureBox box = FeatureBox::unconstrained(schema);
  for (std::size_t f = 0; f < schema.n_features(); ++f) {
    const json& jf = j.at(f);
    if (schema.features[f].kind == FeatureKind::numerical) {
      if (jf.contains("lo")) box.intervals[f].lo = jf.at("lo").get<double>();
      if (jf.contains("hi")) box.intervals[f].hi = jf.at("hi").get<double>();
    } else {
      box.cat_candidates[f] = jf.at("candidates").get<std::vector<int>>();
    }
  }
  return box;
}

json recon_to_json(const ReconstructedDataset& recon) {
  json samples = json::array();
  for (const auto& s : recon.samples) {
    samples.push_back(json{{"box", box_to_json(s.box, recon.schema)},
                           {"label", s.label},
                           {"margin_acc", s.margin_acc},
                           {"p", s.p},
                           {"g", s.g},
                           {"h", s.h},
                           {"origin_leaf", s.origin_leaf}});
  }
  json j;
  j["victim"] = recon.victim < 0 ? json("global") : json(recon.victim);
  j["samples"] = std::move(samples);
  j["source_params"] = params_to_json(recon.source_params);
  return j;
}

ReconstructedDataset recon_from_json(const json& j, const FeatureSchema& schema) {
  ReconstructedDataset recon;
  recon.schema = schema;
  recon.source_params = params_from_json(j.at("source_params"));
  recon.victim = j.at("victim").is_string() ? -1 : j.at("victim").get<int>();
  for (const auto& js : j.at("samples")) {
    ReconstructedSample s;
    s.box = box_from_json(js.at("box"), schema);
    s.label = js.at("label").get<int>();
    s.margin_acc = js.at("margin_acc").get<std::vector<double>>();
    s.p = js.at("p").get<std::vector<double>>();
    s.g = js.at("g").get<std::vector<double>>();
    s.h = js.at("h").get<std::vector<double>>();
    s.origin_leaf = js.at("origin_leaf").get<int>();
    recon.samples.push_back(std::move(s));
  }
  return recon;
}

}  // namespace

std::string schema_to_json(const FeatureSchema& schema) {
  json features = json::array();
  for (const auto& f : schema.features) {
    json jf{{"name", f.name},
            {"kind", f.kind == FeatureKind::numerical ? "numerical" : "categorical"}};
    if (f.kind == FeatureKind::categorical) jf["categories"] = f.categories;
    features.push_back(std::move(jf));
  }
  json j{{"features", std::move(features)},
         {"label", json{{"name", schema.label.name}, {"classes", schema.label.classes}}}};
  return j.dump(2);
}

FeatureSchema schema_from_json(const std::string& text) {
  FeatureSchema schema;
  try {
    json j = json::parse(text);
    for (const auto& jf : j.at("features")) {
      FeatureSpec f;
      f.name = jf.at("name").get<std::string>();
      std::string kind = jf.at("kind").get<std::string>();
      if (kind == "numerical") {
        f.kind = FeatureKind::numerical;
      } else if (kind == "categorical") {
        f.kind = FeatureKind::categorical;
        f.categories = jf.at("categories").get<std::vector<std::string>>();
      } else {
        throw ConfigError("schema: unknown feature kind '" + kind + "'");
      }
      schema.features.push_back(std::move(f));
    }
    schema.label.name = j.at("label").at("name").get<std::string>();
    schema.label.classes = j.at("label").at("classes").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("schema: malformed document: ") + e.what());
  }
  schema.validate();
  return schema;
}

std::string ensemble_to_json(const Ensemble& ens) { return ensemble_to_json_obj(ens).dump(2); }

Ensemble ensemble_from_json(const std::string& text) {
  try {
    return ensemble_from_json_obj(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("ensemble: malformed document: ") + e.what());
  }
}

std::string view_to_json(const ClientView& view) {
  json log = json::array();
  for (const auto& e : view.round_log)
    log.push_back(json{{"round", e.round}, {"artifact", e.artifact}, {"trees", e.tree_indices}});
  json j{{"observer", view.observer},
         {"protocol", protocol_name(view.protocol)},
         {"params", params_to_json(view.params)},
         {"model", ensemble_to_json_obj(view.model)},
         {"round_log", std::move(log)}};
  return j.dump(2);
}

ClientView view_from_json(const std::string& text) {
  try {
    json j = json::parse(text);
    ClientView view;
    view.observer = j.at("observer").get<int>();
    view.protocol = protocol_from_name(j.at("protocol").get<std::string>());
    view.params = params_from_json(j.at("params"));
    view.model = ensemble_from_json_obj(j.at("model"));
    for (const auto& je : j.at("round_log")) {
      RoundLogEntry e;
      e.round = je.at("round").get<int>();
      e.artifact = je.at("artifact").get<std::string>();
      e.tree_indices = je.at("trees").get<std::vector<int>>();
      view.round_log.push_back(std::move(e));
    }
    return view;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("view: malformed document: ") + e.what());
  }
}

std::string fed_config_to_json(const FedConfig& cfg) {
  json j{{"protocol", protocol_name(cfg.protocol)},
         {"n_clients", cfg.n_clients},
         {"rounds", cfg.rounds},
         {"boost", params_to_json(cfg.boost)},
         {"seed", cfg.seed}};
  if (cfg.defense) {
    json d;
    if (cfg.defense->epsilon_total) d["epsilon_total"] = *cfg.defense->epsilon_total;
    if (cfg.defense->epsilon_histogram) d["epsilon_histogram"] = *cfg.defense->epsilon_histogram;
    d["clip_r"] = cfg.defense->clip_r;
    d["seed"] = cfg.defense->seed;
    j["defense"] = std::move(d);
  }
  return j.dump(2);
}

FedConfig fed_config_from_json(const std::string& text) {
  try {
    json j = json::parse(text);
    FedConfig cfg;
    cfg.protocol = protocol_from_name(j.at("protocol").get<std::string>());
    cfg.n_clients = j.at("n_clients").get<int>();
    cfg.rounds = j.at("rounds").get<int>();
    if (j.contains("boost")) cfg.boost = params_from_json(j.at("boost"));
    cfg.seed = j.value("seed", 0ull);
    if (j.contains("defense") && !j.at("defense").is_null()) {
      const json& d = j.at("defense");
      DPConfig dp;
      if (d.contains("epsilon_total")) dp.epsilon_total = d.at("epsilon_total").get<double>();
      if (d.contains("epsilon_histogram"))
        dp.epsilon_histogram = d.at("epsilon_histogram").get<double>();
      dp.clip_r = d.value("clip_r", 1.0);
      dp.seed = d.value("seed", 0ull);
      cfg.defense = dp;
    }
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("fed config: malformed document: ") + e.what());
  }
}

std::string attack_report_to_json(const AttackReport& report) {
  json per_tree = json::array();
  for (const auto& r : report.per_tree)
    per_tree.push_back(json{{"tree_index", r.tree_index},
                            {"status", tree_solve_status_name(r.status)},
                            {"objective", r.objective},
                            {"wall_clock_s", r.wall_clock_s}});
  json j{{"phase1", recon_to_json(report.phase1)},
         {"final", recon_to_json(report.final)},
         {"per_tree", std::move(per_tree)},
         {"wall_clock_s", report.wall_clock_s},
         {"chain_ambiguous", report.chain_ambiguous}};
  return j.dump(2);
}

AttackReport attack_report_from_json(const std::string& text, const FeatureSchema& schema) {
  try {
    json j = json::parse(text);
    AttackReport report;
    report.phase1 = recon_from_json(j.at("phase1"), schema);
    report.final = recon_from_json(j.at("final"), schema);
    for (const auto& jr : j.at("per_tree")) {
      PerTreeRecord r;
      r.tree_index = jr.at("tree_index").get<int>();
      std::string status = jr.at("status").get<std::string>();
      r.status = status == "optimal"        ? TreeSolveStatus::optimal
                 : status == "time_limited" ? TreeSolveStatus::time_limited
                                            : TreeSolveStatus::infeasible_relaxed;
      r.objective = jr.at("objective").get<double>();
      r.wall_clock_s = jr.at("wall_clock_s").get<double>();
      report.per_tree.push_back(r);
    }
    report.wall_clock_s = j.value("wall_clock_s", 0.0);
    report.chain_ambiguous = j.value("chain_ambiguous", false);
    return report;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("attack report: malformed document: ") + e.what());
  }
}

std::string match_report_to_json(const MatchReport& report) {
  json j{{"ra", report.ra},
         {"pairing", report.pairing},
         {"per_pair", report.per_pair},
         {"per_feature", report.per_feature}};
  return j.dump(2);
}

std::string assignment_to_json(const AssignmentProblem& problem, const Assignment& solution) {
  json samples = json::array();
  for (const auto& s : problem.samples)
    samples.push_back(json{{"g", s.g}, {"h", s.h}, {"reachable", s.reachable}});
  json leaves = json::array();
  for (const auto& l : problem.leaves)
    leaves.push_back(json{{"G", l.grad_target}, {"H", l.hess_target}});
  json j{{"samples", std::move(samples)},
         {"leaves", std::move(leaves)},
         {"assignment", solution.leaf_of},
         {"objective", solution.objective},
         {"status", solution.status == SolveStatus::optimal ? "optimal" : "time_limited"}};
  return j.dump(2);
}

std::string recon_to_midpoint_csv(const ReconstructedDataset& recon) {
  std::ostringstream out;
  const auto& schema = recon.schema;
  for (std::size_t f = 0; f < schema.n_features(); ++f) out << schema.features[f].name << ',';
  out << schema.label.name << '\n';
  for (const auto& s : recon.samples) {
    for (std::size_t f = 0; f < schema.n_features(); ++f) {
      double clamp_lo = 0.0, clamp_hi = 0.0;
      if (schema.features[f].kind == FeatureKind::numerical && recon.attacker_bounds.numeric.size() > f &&
          recon.attacker_bounds.numeric[f]) {
        clamp_lo = recon.attacker_bounds.numeric[f]->min;
        clamp_hi = recon.attacker_bounds.numeric[f]->max;
      }
      double mid = s.box.midpoint(schema, f, clamp_lo, clamp_hi);
      out << decode_value(schema, f, schema.features[f].kind == FeatureKind::categorical
                                         ? std::floor(mid)
                                         : mid)
          << ',';
    }
    out << s.label << '\n';
  }
  return out.str();
}

std::string recon_ranges_to_json(const ReconstructedDataset& recon) {
  json samples = json::array();
  for (const auto& s : recon.samples)
    samples.push_back(json{{"box", box_to_json(s.box, recon.schema)}, {"label", s.label}});
  return json{{"samples", std::move(samples)}}.dump(2);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << content;
}

}  // namespace fedgbdt
