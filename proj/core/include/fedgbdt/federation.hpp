#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedgbdt/defense.hpp"
#include "fedgbdt/gbdt.hpp"
#include "fedgbdt/tabular.hpp"

namespace fedgbdt {

enum class Protocol { bagging, cyclic, fedxgbllr, histogram, hardened_histogram };

std::string protocol_name(Protocol p);
Protocol protocol_from_name(const std::string& name);

struct FedConfig {
  Protocol protocol = Protocol::histogram;
  int n_clients = 2;
  int rounds = 1;  // boosting rounds; local ensemble size for fedxgbllr
  BoostParams boost;
  std::optional<DPConfig> defense;  // histogram protocols only
  std::uint64_t seed = 0;

  void validate() const;
};

struct RoundLogEntry {
  int round = 0;
  std::string artifact;           // "trees", "global_tree", "split_decisions", ...
  std::vector<int> tree_indices;  // indices into the view's model
};

// Exactly what one client observes under a protocol: the model as broadcast
// (provenance tags only where the protocol reveals ordering), the shared
// hyperparameters, and the per-round artifact log.
struct ClientView {
  int observer = -1;
  Protocol protocol = Protocol::histogram;
  Ensemble model;
  BoostParams params;
  std::vector<RoundLogEntry> round_log;
};

struct FedResult {
  Ensemble global;  // true provenance tags retained
  std::vector<ClientView> views;
  std::vector<double> tree_weights;  // fedxgbllr refinement phase
};

FedResult run_bagging(const std::vector<Dataset>& clients, const FedConfig& cfg);
FedResult run_cyclic(const std::vector<Dataset>& clients, const FedConfig& cfg);
FedResult run_fedxgbllr(const std::vector<Dataset>& clients, const FedConfig& cfg);
FedResult run_histogram(const std::vector<Dataset>& clients, const FedConfig& cfg);

FedResult run_federated(const std::vector<Dataset>& clients, const FedConfig& cfg);

}  // namespace fedgbdt
