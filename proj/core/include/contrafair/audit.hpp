#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "contrafair/fairness.hpp"
#include "contrafair/predictor.hpp"
#include "contrafair/report.hpp"

namespace contrafair {

struct PredictorEntry {
  std::string name;
  Family family = Family::kFull;
  // Load a saved predictor instead of training one.
  std::optional<std::filesystem::path> path;
  TrainConfig train;
  // False: training uses the audit seed.
  bool pinned_seed = false;
};

enum class SubjectScope { kHeldout, kAll, kListed };

struct SubjectPair {
  std::string i;
  std::string j;
  std::optional<double> lambda_margin;  // overrides the tolerance for this pair
};

struct CriterionRequest {
  std::string criterion;
  SubjectScope scope = SubjectScope::kHeldout;
  std::vector<std::string> subjects;
  std::vector<SubjectPair> pairs;
  // Unset d / d_prime in a d_contrast request: the predicted decision and the
  // runner-up.
  std::optional<std::string> d;
  std::optional<std::string> d_prime;
  std::int64_t t = 0;
  std::int64_t t_prime = 1;
  std::string group;               // population criteria
  std::string favorable;           // equality_of_opportunity
  double pair_threshold = 0.0;     // individual_fairness
  double score_threshold = 0.0;    // individual_fairness
  std::vector<std::string> predictors;  // empty: every predictor
  Tolerance tolerance;
};

struct AuditConfig {
  std::filesystem::path graph_path;
  std::filesystem::path data_path;
  std::uint64_t seed = 0;
  std::optional<double> outcome_threshold;
  std::vector<std::string> decisions;  // defaults to the levels of a categorical outcome
  double heldout_fraction = 0.2;
  std::vector<PredictorEntry> predictors;
  std::vector<CriterionRequest> criteria;
  std::optional<std::filesystem::path> output_path;
  ReportFormat output_format = ReportFormat::kJson;
  std::string config_hash;
  bool timestamp = false;
};

// Names accepted in CriterionRequest::criterion.
inline constexpr std::string_view kCriterionNames[] = {
    "counterfactual_fairness", "d_contrast",         "i_contrast",
    "t_contrast",              "contrast_margin",    "demographic_parity",
    "equality_of_opportunity", "individual_fairness"};

// Relative paths resolve against `base_dir`. The hash covers the document.
AuditConfig audit_config_from_json(const Json& doc, const std::filesystem::path& base_dir);
AuditConfig load_audit_config(const std::filesystem::path& path);

// Seed precedence: flag, then the CONTRAFAIR_SEED environment variable, then
// the config value.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t config_seed);

std::string fnv1a_hex(std::string_view text);

// Split, fit on the training rows, train or load predictors, score the
// held-out rows and run every requested check.
AuditReport run_audit(const AuditConfig& config, const CausalGraph& graph, std::span<const Individual> dataset);
AuditReport run_audit(const AuditConfig& config);

// Deterministic shuffle split; returns (train, heldout) row indices, each ascending.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_rows(std::size_t n, double heldout_fraction,
                                                                         std::uint64_t seed);

}  // namespace contrafair
