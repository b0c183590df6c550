#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "contrafair/fairness.hpp"
#include "contrafair/predictor.hpp"
#include "contrafair/serialization.hpp"

namespace contrafair {

inline constexpr int kReportSchemaVersion = 1;

struct AccuracyColumn {
  Family family = Family::kFull;
  std::string predictor;
  std::string architecture;
  double accuracy = 0.0;
  std::size_t samples = 0;
};

struct ReportMetadata {
  std::string tool = "contrafair";
  std::string tool_version;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::optional<std::string> timestamp;
  std::size_t train_rows = 0;
  std::size_t heldout_rows = 0;
  std::string penalty_aggregation;
};

struct ReportSummary {
  std::size_t checks = 0;
  std::size_t passed = 0;
  std::size_t failed = 0;
};

struct AuditReport {
  int schema_version = kReportSchemaVersion;
  ReportMetadata metadata;
  // Columns in family order Full, Unaware, Counterfactual, Contrastive.
  std::vector<AccuracyColumn> accuracy_table;
  std::vector<Verdict> verdicts;

  ReportSummary summary() const;
  bool all_passed() const;
};

enum class ReportFormat { kJson, kText };
ReportFormat parse_report_format(std::string_view text);

Json to_json(const Verdict& verdict);
Verdict verdict_from_json(const Json& doc);

Json to_json(const AuditReport& report);
AuditReport report_from_json(const Json& doc);

std::string render_report(const AuditReport& report, ReportFormat format);
// Writes the rendering to `path`. Throws IoError.
void emit_report(const AuditReport& report, ReportFormat format, const std::filesystem::path& path);

}  // namespace contrafair
