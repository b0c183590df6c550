#include "contrafair/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "contrafair/error.hpp"

namespace contrafair {
namespace {

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (k > 0) out += sep;
    out += parts[k];
  }
  return out;
}

}  // namespace

ReportSummary AuditReport::summary() const {
  ReportSummary s;
  s.checks = verdicts.size();
  s.passed = static_cast<std::size_t>(
      std::count_if(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.passed; }));
  s.failed = s.checks - s.passed;
  return s;
}

bool AuditReport::all_passed() const { return summary().failed == 0; }

ReportFormat parse_report_format(std::string_view text) {
  if (text == "json") return ReportFormat::kJson;
  if (text == "text") return ReportFormat::kText;
  throw Error(ErrorCode::kInvalidArgument, "unknown report format '" + std::string(text) + "'");
}

Json to_json(const Verdict& verdict) {
  Json out;
  out["criterion"] = verdict.criterion;
  out["predictor"] = verdict.predictor;
  out["passed"] = verdict.passed;
  out["individuals"] = verdict.individuals;
  out["decisions"] = verdict.decisions;
  out["interventions"] = verdict.interventions;
  Json clauses = Json::array();
  for (const auto& c : verdict.clauses) {
    Json item;
    item["equation"] = c.equation;
    item["passed"] = c.passed;
    item["lhs"] = c.lhs;
    item["rhs"] = c.rhs;
    item["margin"] = c.margin;
    item["intervention"] = c.intervention;
    item["decision"] = c.decision;
    item["subject"] = c.subject;
    item["advisory"] = c.advisory;
    clauses.push_back(std::move(item));
  }
  out["clauses"] = std::move(clauses);
  return out;
}

Verdict verdict_from_json(const Json& doc) {
  try {
    Verdict v;
    v.criterion = doc.at("criterion").get<std::string>();
    v.predictor = doc.value("predictor", "");
    v.passed = doc.at("passed").get<bool>();
    v.individuals = doc.value("individuals", std::vector<std::string>{});
    v.decisions = doc.value("decisions", std::vector<std::string>{});
    v.interventions = doc.value("interventions", std::vector<std::string>{});
    for (const auto& item : doc.at("clauses")) {
      Clause c;
      c.equation = item.at("equation").get<std::string>();
      c.passed = item.at("passed").get<bool>();
      c.lhs = item.at("lhs").get<double>();
      c.rhs = item.at("rhs").get<double>();
      c.margin = item.at("margin").get<double>();
      c.intervention = item.value("intervention", "");
      c.decision = item.value("decision", "");
      c.subject = item.value("subject", "");
      c.advisory = item.value("advisory", false);
      v.clauses.push_back(std::move(c));
    }
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("verdict: ") + e.what());
  }
}

Json to_json(const AuditReport& report) {
  const ReportMetadata& m = report.metadata;
  Json out;
  out["schema_version"] = report.schema_version;
  Json meta;
  meta["tool"] = m.tool;
  meta["tool_version"] = m.tool_version;
  meta["config_hash"] = m.config_hash;
  meta["seed"] = m.seed;
  meta["timestamp"] = m.timestamp ? Json(*m.timestamp) : Json(nullptr);
  meta["split"] = {{"train", m.train_rows}, {"heldout", m.heldout_rows}};
  meta["penalty_aggregation"] = m.penalty_aggregation;
  out["metadata"] = std::move(meta);
  Json table = Json::array();
  for (const auto& col : report.accuracy_table) {
    Json item;
    item["family"] = std::string(display_name(col.family));
    item["predictor"] = col.predictor;
    item["architecture"] = col.architecture;
    item["accuracy"] = col.accuracy;
    item["samples"] = col.samples;
    table.push_back(std::move(item));
  }
  out["accuracy_table"] = std::move(table);
  Json verdicts = Json::array();
  for (const auto& v : report.verdicts) verdicts.push_back(to_json(v));
  out["verdicts"] = std::move(verdicts);
  const ReportSummary s = report.summary();
  out["summary"] = {{"checks", s.checks}, {"passed", s.passed}, {"failed", s.failed}};
  return out;
}

AuditReport report_from_json(const Json& doc) {
  try {
    AuditReport r;
    r.schema_version = doc.at("schema_version").get<int>();
    if (r.schema_version != kReportSchemaVersion) {
      throw Error(ErrorCode::kParseError, "unsupported report schema_version " + std::to_string(r.schema_version));
    }
    const Json& meta = doc.at("metadata");
    r.metadata.tool = meta.at("tool").get<std::string>();
    r.metadata.tool_version = meta.at("tool_version").get<std::string>();
    r.metadata.config_hash = meta.at("config_hash").get<std::string>();
    r.metadata.seed = meta.at("seed").get<std::uint64_t>();
    if (!meta.at("timestamp").is_null()) r.metadata.timestamp = meta.at("timestamp").get<std::string>();
    r.metadata.train_rows = meta.at("split").at("train").get<std::size_t>();
    r.metadata.heldout_rows = meta.at("split").at("heldout").get<std::size_t>();
    r.metadata.penalty_aggregation = meta.at("penalty_aggregation").get<std::string>();
    for (const auto& item : doc.at("accuracy_table")) {
      AccuracyColumn col;
      const std::string family = item.at("family").get<std::string>();
      auto it = std::find_if(std::begin(kAllFamilies), std::end(kAllFamilies),
                             [&](Family f) { return display_name(f) == family; });
      if (it == std::end(kAllFamilies)) throw Error(ErrorCode::kParseError, "unknown family '" + family + "'");
      col.family = *it;
      col.predictor = item.at("predictor").get<std::string>();
      col.architecture = item.at("architecture").get<std::string>();
      col.accuracy = item.at("accuracy").get<double>();
      col.samples = item.at("samples").get<std::size_t>();
      r.accuracy_table.push_back(std::move(col));
    }
    for (const auto& item : doc.at("verdicts")) r.verdicts.push_back(verdict_from_json(item));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("report: ") + e.what());
  }
}

std::string render_report(const AuditReport& report, ReportFormat format) {
  if (format == ReportFormat::kJson) return dump(to_json(report));

  const ReportMetadata& m = report.metadata;
  std::ostringstream out;
  out << m.tool << ' ' << m.tool_version << " audit report\n";
  out << "config " << m.config_hash << ", seed " << m.seed;
  if (m.timestamp) out << ", " << *m.timestamp;
  out << '\n';
  out << "split: " << m.train_rows << " train, " << m.heldout_rows << " held-out\n";

  if (!report.accuracy_table.empty()) {
    std::vector<std::size_t> widths;
    for (const auto& col : report.accuracy_table) {
      widths.push_back(std::max<std::size_t>({std::string(display_name(col.family)).size(), col.predictor.size(), 5}) + 2);
    }
    const std::size_t label = 11;
    out << "\nHeld-out accuracy\n" << pad("", label);
    for (std::size_t k = 0; k < widths.size(); ++k) {
      out << pad(std::string(display_name(report.accuracy_table[k].family)), widths[k]);
    }
    out << '\n' << pad("accuracy", label);
    for (std::size_t k = 0; k < widths.size(); ++k) out << pad(fixed3(report.accuracy_table[k].accuracy), widths[k]);
    out << '\n' << pad("predictor", label);
    for (std::size_t k = 0; k < widths.size(); ++k) out << pad(report.accuracy_table[k].predictor, widths[k]);
    out << '\n';
    for (const auto& col : report.accuracy_table) {
      out << "  " << display_name(col.family) << ": " << col.architecture << '\n';
    }
  }

  if (!report.verdicts.empty()) out << "\nVerdicts\n";
  for (const auto& v : report.verdicts) {
    std::vector<std::string> failing;
    std::vector<std::string> advisory;
    for (const auto& c : v.clauses) {
      if (c.passed) continue;
      (c.advisory ? advisory : failing).push_back(c.equation);
    }
    out << (v.passed ? "PASS " : "FAIL ") << v.criterion;
    if (!v.predictor.empty()) out << " [" << v.predictor << ']';
    if (!v.individuals.empty() && v.individuals.size() <= 4) out << ' ' << join(v.individuals, ",");
    if (!failing.empty()) out << "  failing: " << join(failing, ",");
    if (!advisory.empty()) out << "  advisory: " << join(advisory, ",");
    out << '\n';
  }
  const ReportSummary s = report.summary();
  out << '\n' << s.checks << " checks, " << s.passed << " passed, " << s.failed << " failed\n";

  std::string text = out.str();
  std::string trimmed;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    line.erase(line.find_last_not_of(' ') + 1);
    trimmed += line;
    if (end < text.size()) trimmed += '\n';
    start = end + 1;
  }
  return trimmed;
}

void emit_report(const AuditReport& report, ReportFormat format, const std::filesystem::path& path) {
  write_text(path, render_report(report, format));
}

}  // namespace contrafair
