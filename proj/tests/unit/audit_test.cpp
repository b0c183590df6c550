#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <regex>

#include <gtest/gtest.h>

#include "builders.hpp"
#include "contrafair/audit.hpp"
#include "contrafair/dataset.hpp"
#include "contrafair/synth.hpp"

namespace contrafair {
namespace {

using testing::code_of;

const std::filesystem::path kData = CONTRAFAIR_DATA_DIR;

const Verdict& only_verdict(const AuditReport& report, const std::string& criterion) {
  auto it = std::find_if(report.verdicts.begin(), report.verdicts.end(),
                         [&](const Verdict& v) { return v.criterion == criterion; });
  if (it == report.verdicts.end()) throw std::runtime_error("no verdict " + criterion);
  return *it;
}

TEST(Split, ReproducibleAndDisjoint) {
  const auto [train_a, held_a] = split_rows(100, 0.2, 7);
  const auto [train_b, held_b] = split_rows(100, 0.2, 7);
  EXPECT_EQ(train_a, train_b);
  EXPECT_EQ(held_a, held_b);
  EXPECT_EQ(held_a.size(), 20u);
  EXPECT_EQ(train_a.size(), 80u);
  std::vector<std::size_t> all = train_a;
  all.insert(all.end(), held_a.begin(), held_a.end());
  std::sort(all.begin(), all.end());
  for (std::size_t k = 0; k < all.size(); ++k) EXPECT_EQ(all[k], k);
  EXPECT_NE(split_rows(100, 0.2, 8).second, held_a);
  EXPECT_EQ(split_rows(3, 0.01, 1).second.size(), 1u);
}

TEST(Seed, FlagThenEnvironmentThenConfig) {
  ::unsetenv("CONTRAFAIR_SEED");
  EXPECT_EQ(resolve_seed(std::nullopt, 5), 5u);
  ::setenv("CONTRAFAIR_SEED", "17", 1);
  EXPECT_EQ(resolve_seed(std::nullopt, 5), 17u);
  EXPECT_EQ(resolve_seed(23, 5), 23u);
  ::setenv("CONTRAFAIR_SEED", "seventeen", 1);
  EXPECT_EQ(code_of([] { resolve_seed(std::nullopt, 5); }), ErrorCode::kInvalidArgument);
  ::unsetenv("CONTRAFAIR_SEED");
}

TEST(Config, Conflicts) {
  const Json base = read_json(kData / "job_location" / "audit.json");
  auto code = [&](auto&& edit) {
    Json doc = base;
    edit(doc);
    return code_of([&] { audit_config_from_json(doc, kData / "job_location"); });
  };
  EXPECT_EQ(code([](Json& d) { d["criteria"] = Json::array(); }), ErrorCode::kConfigConflict);
  EXPECT_EQ(code([](Json& d) { d["predictors"] = Json::array(); }), ErrorCode::kConfigConflict);
  EXPECT_EQ(code([](Json& d) { d["criteria"][0]["criterion"] = "vibes"; }), ErrorCode::kConfigConflict);
  EXPECT_EQ(code([](Json& d) { d["criteria"][0].erase("pairs"); }), ErrorCode::kConfigConflict);
  EXPECT_EQ(code([](Json& d) { d["criteria"][1]["t_prime"] = 0; }), ErrorCode::kConfigConflict);
  EXPECT_EQ(code([](Json& d) { d["surprise"] = 1; }), ErrorCode::kParseError);
  EXPECT_EQ(code([](Json& d) { d["predictors"].push_back(d["predictors"][0]); }), ErrorCode::kConfigConflict);
}

TEST(Config, HashCoversDocument) {
  const Json doc = read_json(kData / "job_location" / "audit.json");
  const AuditConfig a = audit_config_from_json(doc, kData);
  Json changed = doc;
  changed["seed"] = 12;
  const AuditConfig b = audit_config_from_json(changed, kData);
  EXPECT_EQ(a.config_hash.size(), 16u);
  EXPECT_NE(a.config_hash, b.config_hash);
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
}

TEST(RunAudit, JobLocationIContrastHasSixClauses) {
  const AuditReport report = run_audit(load_audit_config(kData / "job_location" / "audit.json"));
  const Verdict& v = only_verdict(report, "i_contrast");
  ASSERT_EQ(v.clauses.size(), 6u);
  std::vector<std::string> eqs;
  for (const auto& c : v.clauses) eqs.push_back(c.equation);
  EXPECT_EQ(eqs, (std::vector<std::string>{"eq4", "eq5", "eq6", "eq7", "eq8", "eq9"}));
  EXPECT_EQ(v.individuals, (std::vector<std::string>{"P", "Q"}));
  EXPECT_EQ(v.predictor, "residual");
  EXPECT_TRUE(report.all_passed());
  EXPECT_EQ(report.metadata.train_rows + report.metadata.heldout_rows, 200u);
}

TEST(RunAudit, LawSchoolAccuracyColumnsInFamilyOrder) {
  const AuditReport report = run_audit(load_audit_config(kData / "law_school" / "audit.json"));
  ASSERT_EQ(report.accuracy_table.size(), 4u);
  const Family order[] = {Family::kFull, Family::kUnaware, Family::kCounterfactual, Family::kContrastive};
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(report.accuracy_table[k].family, order[k]);
    EXPECT_GE(report.accuracy_table[k].accuracy, 0.0);
    EXPECT_LE(report.accuracy_table[k].accuracy, 1.0);
    EXPECT_EQ(report.accuracy_table[k].samples, report.metadata.heldout_rows);
  }
  EXPECT_EQ(report.metadata.heldout_rows, 400u);
}

TEST(RunAudit, SingleSnapshotDataRejectsTContrast) {
  AuditConfig config = load_audit_config(kData / "job_location" / "audit.json");
  const CausalGraph graph = load_graph(config.graph_path);
  auto people = load_dataset(config.data_path, graph);
  for (auto& p : people) p.snapshots.resize(1);
  EXPECT_EQ(code_of([&] { run_audit(config, graph, people); }), ErrorCode::kConfigConflict);
}

TEST(RunAudit, UnknownSubjectRejected) {
  Json doc = read_json(kData / "job_location" / "audit.json");
  doc["criteria"][0]["pairs"][0][1] = "nobody";
  const AuditConfig config = audit_config_from_json(doc, kData / "job_location");
  EXPECT_EQ(code_of([&] { run_audit(config); }), ErrorCode::kConfigConflict);
}

TEST(RunAudit, SameSeedSameReport) {
  const AuditConfig config = load_audit_config(kData / "job_location" / "audit_biased.json");
  const std::string a = dump(to_json(run_audit(config)));
  const std::string b = dump(to_json(run_audit(config)));
  EXPECT_EQ(a, b);
}

TEST(Report, JsonRoundTripIsByteIdentical) {
  const AuditReport report = run_audit(load_audit_config(kData / "job_location" / "audit_biased.json"));
  EXPECT_FALSE(report.all_passed());
  const std::string first = dump(to_json(report));
  const std::string second = dump(to_json(report_from_json(Json::parse(first))));
  EXPECT_EQ(first, second);
  const Json doc = Json::parse(first);
  std::vector<std::string> keys;
  for (const auto& [key, value] : doc.items()) keys.push_back(key);
  EXPECT_EQ(keys, (std::vector<std::string>{"schema_version", "metadata", "accuracy_table", "verdicts", "summary"}));
  EXPECT_EQ(doc["schema_version"], 1);
  const Json& clause = doc["verdicts"][0]["clauses"][0];
  for (const char* key : {"equation", "passed", "lhs", "rhs", "margin", "intervention", "decision"}) {
    EXPECT_TRUE(clause.contains(key)) << key;
  }
}

TEST(Report, EmptyVerdictsSummarizeToZero) {
  AuditReport report;
  EXPECT_EQ(report.summary().checks, 0u);
  EXPECT_TRUE(report.all_passed());
  const std::string text = render_report(report, ReportFormat::kText);
  EXPECT_NE(text.find("0 checks"), std::string::npos) << text;
  EXPECT_EQ(dump(to_json(report_from_json(to_json(report)))), dump(to_json(report)));
}

TEST(Report, AccuracyRowLayout) {
  AuditReport report;
  const std::pair<Family, double> cols[] = {{Family::kFull, 0.873},
                                            {Family::kUnaware, 0.894},
                                            {Family::kCounterfactual, 0.918},
                                            {Family::kContrastive, 0.937}};
  for (const auto& [family, acc] : cols) {
    report.accuracy_table.push_back({family, std::string(to_string(family)), "logistic regression", acc, 1000});
  }
  const std::string text = render_report(report, ReportFormat::kText);
  EXPECT_TRUE(std::regex_search(text, std::regex(R"(\n\s+Full\s+Unaware\s+Counterfactual\s+Contrastive\n)")))
      << text;
  EXPECT_TRUE(std::regex_search(text, std::regex(R"(\naccuracy\s+0\.873\s+0\.894\s+0\.918\s+0\.937\n)"))) << text;
}

TEST(Report, FailingClausesNamed) {
  AuditReport report;
  Verdict v;
  v.criterion = "contrast_margin";
  v.predictor = "full";
  v.individuals = {"P", "Q"};
  v.clauses = {Clause{"eq13", false}, Clause{"eq14", false, 0, 0, 0, "", "", "", true}};
  v.settle();
  report.verdicts.push_back(v);
  const std::string text = render_report(report, ReportFormat::kText);
  EXPECT_NE(text.find("FAIL contrast_margin [full] P,Q  failing: eq13  advisory: eq14"), std::string::npos) << text;
  EXPECT_NE(text.find("1 checks, 0 passed, 1 failed"), std::string::npos) << text;
  EXPECT_EQ(parse_report_format("text"), ReportFormat::kText);
  EXPECT_THROW(parse_report_format("yaml"), Error);
}

}  // namespace
}  // namespace contrafair
