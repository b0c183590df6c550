// contrafair command-line tool.
//
// Exit status: 0 when every verdict passed, 2 when an audit ran and at least
// one verdict failed, 1 on any operational error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "contrafair/audit.hpp"
#include "contrafair/dataset.hpp"
#include "contrafair/error.hpp"
#include "contrafair/report.hpp"
#include "contrafair/scm.hpp"
#include "contrafair/serialization.hpp"
#include "contrafair/synth.hpp"

namespace fs = std::filesystem;
using namespace contrafair;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitFailedVerdict = 2;

void write_or_print(const std::optional<fs::path>& out, const std::string& text) {
  if (out) {
    write_text(*out, text);
  } else {
    std::cout << text;
  }
}

int cmd_fit(const fs::path& graph_path, const fs::path& data_path, const std::optional<fs::path>& out) {
  const CausalGraph graph = load_graph(graph_path);
  const auto dataset = load_dataset(data_path, graph);
  write_or_print(out, dump(to_json(fit_scm(graph, dataset))));
  return kExitOk;
}

int cmd_train(const fs::path& graph_path, const fs::path& data_path, const fs::path& config_path,
              std::optional<std::uint64_t> seed_flag, const std::optional<fs::path>& out) {
  const CausalGraph graph = load_graph(graph_path);
  const auto dataset = load_dataset(data_path, graph);
  Json doc = read_json(config_path);
  std::vector<std::string> labels;
  if (doc.is_object() && doc.contains("decisions")) {
    labels = doc["decisions"].get<std::vector<std::string>>();
    doc.erase("decisions");
  } else {
    for (const auto& spec : graph.variables()) {
      if (spec.role == Role::kOutcome && spec.categorical()) labels = spec.levels;
    }
  }
  if (labels.empty()) throw Error(ErrorCode::kConfigConflict, "train config needs a \"decisions\" list");
  TrainConfig config = train_config_from_json(doc);
  config.seed = resolve_seed(seed_flag, config.seed);
  const FittedScm scm = fit_scm(graph, dataset);
  const Predictor predictor = train(config, scm, dataset, DecisionSpace(labels));
  write_or_print(out, dump(to_json(predictor, graph)));
  return kExitOk;
}

int cmd_audit(const fs::path& config_path, std::optional<std::uint64_t> seed_flag, const std::optional<fs::path>& out,
              const std::optional<std::string>& format, bool timestamp) {
  AuditConfig config = load_audit_config(config_path);
  config.seed = resolve_seed(seed_flag, config.seed);
  if (timestamp) config.timestamp = true;
  const AuditReport report = run_audit(config);
  const ReportFormat fmt = format ? parse_report_format(*format) : config.output_format;
  write_or_print(out ? out : config.output_path, render_report(report, fmt));
  return report.all_passed() ? kExitOk : kExitFailedVerdict;
}

int cmd_simulate(const std::optional<std::string>& preset, const std::optional<fs::path>& scm_path, std::size_t n,
                 std::optional<std::uint64_t> seed_flag, const std::optional<fs::path>& out,
                 const std::optional<fs::path>& graph_out, const std::optional<fs::path>& scm_out) {
  if (preset.has_value() == scm_path.has_value()) {
    throw Error(ErrorCode::kInvalidArgument, "simulate needs exactly one of --preset and --graph");
  }
  const std::uint64_t seed = resolve_seed(seed_flag, 0);
  std::optional<FittedScm> scm;
  std::vector<Individual> people;
  if (scm_path) {
    scm = load_scm(*scm_path);
    people = sample_population(*scm, uniform_config(*scm, n, seed));
  } else if (*preset == "fix-a") {
    scm = presets::fix_a();
    people = sample_population(*scm, presets::fix_a_config(n, seed));
  } else if (*preset == "law-school") {
    scm = presets::law_school();
    people = sample_population(*scm, presets::law_school_config(n, seed));
  } else if (*preset == "job-location") {
    scm = presets::job_location();
    people = presets::job_location_population(n, seed);
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown preset '" + *preset + "'");
  }
  if (out) {
    save_dataset(*out, scm->graph(), people);
  } else {
    write_dataset(std::cout, scm->graph(), people);
  }
  if (graph_out) write_text(*graph_out, dump(to_json(scm->graph())));
  if (scm_out) write_text(*scm_out, dump(to_json(*scm)));
  return kExitOk;
}

int cmd_report(const fs::path& input, const std::string& format, const std::optional<fs::path>& out) {
  const AuditReport report = report_from_json(read_json(input));
  write_or_print(out, render_report(report, parse_report_format(format)));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal fairness audits of decision predictors"};
  app.require_subcommand(1);
  app.set_version_flag("--version", CONTRAFAIR_VERSION_STRING);

  fs::path graph_path;
  fs::path data_path;
  fs::path config_path;
  std::optional<fs::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> format;

  auto* fit = app.add_subcommand("fit", "Fit a linear structural causal model");
  fit->add_option("--graph", graph_path, "Graph spec (JSON)")->required();
  fit->add_option("--data", data_path, "Dataset (CSV)")->required();
  fit->add_option("--out", out, "Output model file; stdout when omitted");

  auto* tr = app.add_subcommand("train", "Train one predictor");
  tr->add_option("--graph", graph_path, "Graph spec (JSON)")->required();
  tr->add_option("--data", data_path, "Dataset (CSV)")->required();
  tr->add_option("--config", config_path, "Train config (JSON)")->required();
  tr->add_option("--seed", seed, "Seed; overrides CONTRAFAIR_SEED and the config");
  tr->add_option("--out", out, "Output predictor file; stdout when omitted");

  bool timestamp = false;
  auto* audit = app.add_subcommand("audit", "Run a fairness audit");
  audit->add_option("--config", config_path, "Audit config (JSON)")->required();
  audit->add_option("--seed", seed, "Seed; overrides CONTRAFAIR_SEED and the config");
  audit->add_option("--out", out, "Report file; overrides the config");
  audit->add_option("--format", format, "json or text")->check(CLI::IsMember({"json", "text"}));
  audit->add_flag("--timestamp", timestamp, "Record the wall-clock time in the report");

  std::optional<std::string> preset;
  std::optional<fs::path> scm_in;
  std::optional<fs::path> graph_out;
  std::optional<fs::path> scm_out;
  std::size_t n = 1000;
  auto* sim = app.add_subcommand("simulate", "Sample a synthetic population");
  sim->add_option("--preset", preset, "fix-a, law-school or job-location")
      ->check(CLI::IsMember({"fix-a", "law-school", "job-location"}));
  sim->add_option("--graph", scm_in, "Fitted model file to sample from instead of a preset");
  sim->add_option("-n,--n", n, "Population size")->check(CLI::PositiveNumber);
  sim->add_option("--seed", seed, "Seed; overrides CONTRAFAIR_SEED");
  sim->add_option("--out", out, "Dataset file; stdout when omitted");
  sim->add_option("--graph-out", graph_out, "Also write the graph spec");
  sim->add_option("--scm-out", scm_out, "Also write the generating model");

  fs::path report_in;
  std::string report_format = "text";
  auto* rep = app.add_subcommand("report", "Render a stored JSON report");
  rep->add_option("input", report_in, "Report file (JSON)")->required();
  rep->add_option("--format", report_format, "json or text")->check(CLI::IsMember({"json", "text"}));
  rep->add_option("--out", out, "Output file; stdout when omitted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*fit) return cmd_fit(graph_path, data_path, out);
    if (*tr) return cmd_train(graph_path, data_path, config_path, seed, out);
    if (*audit) return cmd_audit(config_path, seed, out, format, timestamp);
    if (*sim) return cmd_simulate(preset, scm_in, n, seed, out, graph_out, scm_out);
    if (*rep) return cmd_report(report_in, report_format, out);
  } catch (const Error& e) {
    std::cerr << "contrafair: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "contrafair: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
