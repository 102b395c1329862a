#pragma once

#include <string>

#include "fedgbdt/assign_opt.hpp"
#include "fedgbdt/attack.hpp"
#include "fedgbdt/eval.hpp"
#include "fedgbdt/federation.hpp"
#include "fedgbdt/gbdt.hpp"
#include "fedgbdt/tabular.hpp"

namespace fedgbdt {

// Structured-text (JSON) forms of every artifact that crosses a file
// boundary. Keys are stable; absent node statistics serialize as absent
// G / H keys, and unbounded box ends are omitted.

std::string schema_to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const std::string& text);

std::string ensemble_to_json(const Ensemble& ens);
Ensemble ensemble_from_json(const std::string& text);

std::string view_to_json(const ClientView& view);
ClientView view_from_json(const std::string& text);

std::string fed_config_to_json(const FedConfig& cfg);
FedConfig fed_config_from_json(const std::string& text);

std::string attack_report_to_json(const AttackReport& report);
AttackReport attack_report_from_json(const std::string& text, const FeatureSchema& schema);

std::string match_report_to_json(const MatchReport& report);

std::string assignment_to_json(const AssignmentProblem& problem, const Assignment& solution);

// Reconstructed dataset as CSV of interval midpoints (infinite bounds clamped
// to the attacker's own-data range) plus a companion ranges document.
std::string recon_to_midpoint_csv(const ReconstructedDataset& recon);
std::string recon_ranges_to_json(const ReconstructedDataset& recon);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace fedgbdt
