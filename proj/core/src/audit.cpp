#include "contrafair/audit.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <map>
#include <random>
#include <set>

#include "contrafair/dataset.hpp"
#include "contrafair/error.hpp"
#include "contrafair/scm.hpp"
#include "contrafair/serialization.hpp"

#ifndef CONTRAFAIR_VERSION
#define CONTRAFAIR_VERSION "0.0.0"
#endif

namespace contrafair {
namespace {

constexpr const char* kPenaltyAggregation =
    "contrastive penalty: mean over (individual, intervention) of the largest per-decision absolute score change";

[[noreturn]] void conflict(const std::string& message) { throw Error(ErrorCode::kConfigConflict, message); }

void reject_unknown_keys(const Json& doc, std::initializer_list<std::string_view> known, const std::string& where) {
  for (const auto& [key, value] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorCode::kParseError, where + ": unknown key '" + key + "'");
    }
  }
}

Tolerance tolerance_from_json(const Json& doc, Tolerance tol, const std::string& where) {
  if (!doc.is_object()) throw Error(ErrorCode::kParseError, where + ": expected an object");
  reject_unknown_keys(doc, {"eps_fair", "eps_population", "delta_order", "lambda_margin", "strict_margin", "grid"},
                      where);
  tol.eps_fair = doc.value("eps_fair", tol.eps_fair);
  tol.eps_population = doc.value("eps_population", tol.eps_population);
  tol.delta_order = doc.value("delta_order", tol.delta_order);
  tol.lambda_margin = doc.value("lambda_margin", tol.lambda_margin);
  tol.strict_margin = doc.value("strict_margin", tol.strict_margin);
  if (auto it = doc.find("grid"); it != doc.end()) {
    tol.grid.clear();
    for (const auto& [name, values] : it->items()) tol.grid[name] = values.get<std::vector<double>>();
  }
  tol.validate();
  return tol;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& text) {
  std::filesystem::path p(text);
  return p.is_absolute() ? p : base / p;
}

template <typename Fn>
auto step(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), name + ": " + e.detail());
  }
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm parts{};
  gmtime_r(&now, &parts);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &parts);
  return buf;
}

bool is_pair_criterion(const std::string& c) { return c == "i_contrast" || c == "contrast_margin"; }

}  // namespace

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t config_seed) {
  if (flag) return *flag;
  if (const char* env = std::getenv("CONTRAFAIR_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (errno != 0 || *end != '\0' || *env == '-') {
      throw Error(ErrorCode::kInvalidArgument, std::string("CONTRAFAIR_SEED is not an unsigned integer: ") + env);
    }
    return v;
  }
  return config_seed;
}

AuditConfig audit_config_from_json(const Json& doc, const std::filesystem::path& base_dir) {
  try {
    if (!doc.is_object()) throw Error(ErrorCode::kParseError, "audit config: expected an object");
    reject_unknown_keys(doc,
                        {"graph", "data", "seed", "outcome_threshold", "decisions", "heldout_fraction", "tolerance",
                         "predictors", "criteria", "output", "timestamp"},
                        "audit config");
    AuditConfig config;
    config.config_hash = fnv1a_hex(doc.dump());
    config.graph_path = resolve(base_dir, doc.at("graph").get<std::string>());
    config.data_path = resolve(base_dir, doc.at("data").get<std::string>());
    config.seed = doc.value("seed", std::uint64_t{0});
    if (auto it = doc.find("outcome_threshold"); it != doc.end() && !it->is_null()) {
      config.outcome_threshold = it->get<double>();
    }
    config.decisions = doc.value("decisions", std::vector<std::string>{});
    config.heldout_fraction = doc.value("heldout_fraction", 0.2);
    if (!(config.heldout_fraction > 0.0 && config.heldout_fraction < 1.0)) {
      conflict("heldout_fraction must lie strictly between 0 and 1");
    }
    config.timestamp = doc.value("timestamp", false);

    Tolerance base_tol;
    if (auto it = doc.find("tolerance"); it != doc.end()) base_tol = tolerance_from_json(*it, base_tol, "tolerance");

    std::set<std::string> names;
    for (const auto& item : doc.value("predictors", Json::array())) {
      reject_unknown_keys(item, {"name", "family", "path", "train"}, "predictor");
      PredictorEntry entry;
      entry.family = parse_family(item.at("family").get<std::string>());
      entry.name = item.value("name", std::string(to_string(entry.family)));
      if (!names.insert(entry.name).second) conflict("duplicate predictor name '" + entry.name + "'");
      if (auto p = item.find("path"); p != item.end()) entry.path = resolve(base_dir, p->get<std::string>());
      TrainConfig defaults;
      defaults.family = entry.family;
      defaults.seed = config.seed;
      if (auto t = item.find("train"); t != item.end()) {
        if (entry.path) conflict("predictor '" + entry.name + "' has both a path and a train config");
        entry.train = train_config_from_json(*t, defaults);
        entry.pinned_seed = t->contains("seed");
      } else {
        entry.train = defaults;
      }
      if (entry.train.family != entry.family) conflict("predictor '" + entry.name + "': family mismatch");
      config.predictors.push_back(std::move(entry));
    }

    for (const auto& item : doc.value("criteria", Json::array())) {
      reject_unknown_keys(item,
                          {"criterion", "subjects", "pairs", "d", "d_prime", "t", "t_prime", "group", "favorable",
                           "pair_threshold", "score_threshold", "predictors", "tolerance"},
                          "criterion");
      CriterionRequest req;
      req.criterion = item.at("criterion").get<std::string>();
      if (std::find(std::begin(kCriterionNames), std::end(kCriterionNames), req.criterion) ==
          std::end(kCriterionNames)) {
        conflict("unknown criterion '" + req.criterion + "'");
      }
      if (auto s = item.find("subjects"); s != item.end()) {
        if (s->is_string()) {
          const std::string scope = s->get<std::string>();
          if (scope == "all") {
            req.scope = SubjectScope::kAll;
          } else if (scope == "heldout") {
            req.scope = SubjectScope::kHeldout;
          } else {
            conflict("subjects must be \"all\", \"heldout\" or a list of ids");
          }
        } else {
          req.scope = SubjectScope::kListed;
          req.subjects = s->get<std::vector<std::string>>();
          if (req.subjects.empty()) conflict(req.criterion + ": empty subject list");
        }
      }
      for (const auto& p : item.value("pairs", Json::array())) {
        SubjectPair pair;
        if (p.is_array()) {
          if (p.size() != 2) conflict("a pair lists exactly two ids");
          pair.i = p[0].get<std::string>();
          pair.j = p[1].get<std::string>();
        } else {
          pair.i = p.at("i").get<std::string>();
          pair.j = p.at("j").get<std::string>();
          if (auto l = p.find("lambda_margin"); l != p.end()) pair.lambda_margin = l->get<double>();
        }
        req.pairs.push_back(std::move(pair));
      }
      if (auto d = item.find("d"); d != item.end()) req.d = d->get<std::string>();
      if (auto d = item.find("d_prime"); d != item.end()) req.d_prime = d->get<std::string>();
      req.t = item.value("t", std::int64_t{0});
      req.t_prime = item.value("t_prime", std::int64_t{1});
      req.group = item.value("group", "");
      req.favorable = item.value("favorable", "");
      req.pair_threshold = item.value("pair_threshold", 0.0);
      req.score_threshold = item.value("score_threshold", 0.0);
      req.predictors = item.value("predictors", std::vector<std::string>{});
      req.tolerance = base_tol;
      if (auto t = item.find("tolerance"); t != item.end()) {
        req.tolerance = tolerance_from_json(*t, base_tol, req.criterion + ".tolerance");
      }

      const std::string& c = req.criterion;
      if (is_pair_criterion(c) && req.pairs.empty()) conflict(c + " needs at least one pair");
      if (!is_pair_criterion(c) && !req.pairs.empty()) conflict(c + " takes subjects, not pairs");
      if ((c == "i_contrast" || c == "contrast_margin" || c == "t_contrast") && (!req.d || !req.d_prime)) {
        conflict(c + " needs both d and d_prime");
      }
      if (req.d.has_value() != req.d_prime.has_value()) conflict(c + ": give both d and d_prime or neither");
      if ((c == "demographic_parity" || c == "equality_of_opportunity") && req.group.empty()) {
        conflict(c + " needs a group attribute");
      }
      if (c == "equality_of_opportunity" && req.favorable.empty()) conflict(c + " needs a favorable decision");
      if (c == "individual_fairness" && !(req.pair_threshold > 0.0)) conflict(c + " needs a positive pair_threshold");
      if (c == "t_contrast" && req.t == req.t_prime) conflict("t_contrast needs two distinct ticks");
      for (const auto& name : req.predictors) {
        if (!names.contains(name)) conflict(c + ": unknown predictor '" + name + "'");
      }
      config.criteria.push_back(std::move(req));
    }
    if (auto out = doc.find("output"); out != doc.end()) {
      reject_unknown_keys(*out, {"path", "format"}, "output");
      if (auto p = out->find("path"); p != out->end()) config.output_path = resolve(base_dir, p->get<std::string>());
      if (auto f = out->find("format"); f != out->end()) config.output_format = parse_report_format(f->get<std::string>());
    }

    if (config.predictors.empty()) conflict("the audit lists no predictors");
    if (config.criteria.empty()) conflict("the audit requests no criteria");
    return config;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("audit config: ") + e.what());
  }
}

AuditConfig load_audit_config(const std::filesystem::path& path) {
  const Json doc = read_json(path);
  try {
    return audit_config_from_json(doc, path.parent_path());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_rows(std::size_t n, double heldout_fraction,
                                                                         std::uint64_t seed) {
  if (n < 2) conflict("need at least two individuals to split");
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  std::mt19937_64 rng(seed);
  for (std::size_t k = n - 1; k > 0; --k) {
    const std::size_t pick = static_cast<std::size_t>(rng() % (k + 1));
    std::swap(order[k], order[pick]);
  }
  std::size_t heldout = static_cast<std::size_t>(std::llround(heldout_fraction * static_cast<double>(n)));
  heldout = std::clamp<std::size_t>(heldout, 1, n - 1);
  std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(heldout));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(heldout), order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {std::move(train), std::move(test)};
}

AuditReport run_audit(const AuditConfig& config, const CausalGraph& graph, std::span<const Individual> dataset) {
  step("graph", [&] {
    validate_graph(graph);
    return 0;
  });
  if (config.predictors.empty()) conflict("the audit lists no predictors");
  if (config.criteria.empty()) conflict("the audit requests no criteria");

  const VariableSpec* outcome = nullptr;
  for (const auto& spec : graph.variables()) {
    if (spec.role == Role::kOutcome) {
      outcome = &spec;
      break;
    }
  }
  std::vector<std::string> labels = config.decisions;
  if (labels.empty()) {
    if (outcome == nullptr || !outcome->categorical()) {
      conflict("a continuous outcome needs an explicit decision list");
    }
    labels = outcome->levels;
  }
  const DecisionSpace decisions(labels);
  if (outcome != nullptr && !outcome->categorical() && !config.outcome_threshold) {
    conflict("outcome '" + outcome->name + "' is continuous: set outcome_threshold");
  }

  std::map<std::string, std::size_t, std::less<>> by_id;
  for (std::size_t k = 0; k < dataset.size(); ++k) by_id.emplace(dataset[k].id, k);
  auto row_of = [&](const std::string& id, const std::string& criterion) {
    auto it = by_id.find(id);
    if (it == by_id.end()) conflict(criterion + ": individual '" + id + "' is not in the dataset");
    return it->second;
  };
  const bool multi_snapshot =
      std::any_of(dataset.begin(), dataset.end(), [](const Individual& p) { return p.snapshots.size() > 1; });
  for (const auto& req : config.criteria) {
    for (const auto& id : req.subjects) row_of(id, req.criterion);
    for (const auto& pair : req.pairs) {
      row_of(pair.i, req.criterion);
      row_of(pair.j, req.criterion);
      if (pair.i == pair.j) conflict(req.criterion + ": a pair needs two different individuals");
    }
    if (req.criterion == "t_contrast" && !multi_snapshot) {
      conflict("t_contrast requested but every individual has a single snapshot");
    }
    for (const auto* label : {&req.d, &req.d_prime}) {
      if (*label && !decisions.contains(**label)) conflict(req.criterion + ": unknown decision '" + **label + "'");
    }
    if (!req.favorable.empty() && !decisions.contains(req.favorable)) {
      conflict(req.criterion + ": unknown decision '" + req.favorable + "'");
    }
  }

  const auto [train_idx, test_idx] = split_rows(dataset.size(), config.heldout_fraction, config.seed);
  std::vector<Individual> train_rows;
  std::vector<Individual> test_rows;
  for (std::size_t k : train_idx) train_rows.push_back(dataset[k]);
  for (std::size_t k : test_idx) test_rows.push_back(dataset[k]);

  const FittedScm scm = step("fit", [&] { return fit_scm(graph, train_rows); });

  std::vector<Predictor> predictors;
  for (const auto& entry : config.predictors) {
    predictors.push_back(step("predictor '" + entry.name + "'", [&] {
      if (entry.path) {
        Predictor loaded = load_predictor(*entry.path);
        check_predictor_inputs(loaded, graph);
        if (loaded.family() != entry.family) conflict("saved predictor has family " + std::string(to_string(loaded.family())));
        if (!(loaded.decisions() == decisions)) conflict("saved predictor has a different decision space");
        return loaded;
      }
      TrainConfig tc = entry.train;
      if (!entry.pinned_seed) tc.seed = config.seed;
      if (!tc.outcome_threshold) tc.outcome_threshold = config.outcome_threshold;
      return train(tc, scm, train_rows, decisions);
    }));
  }

  AuditReport report;
  report.metadata.tool_version = CONTRAFAIR_VERSION;
  report.metadata.config_hash = config.config_hash;
  report.metadata.seed = config.seed;
  if (config.timestamp) report.metadata.timestamp = utc_now();
  report.metadata.train_rows = train_rows.size();
  report.metadata.heldout_rows = test_rows.size();
  report.metadata.penalty_aggregation = kPenaltyAggregation;

  step("accuracy", [&] {
    for (std::size_t k = 0; k < predictors.size(); ++k) {
      report.accuracy_table.push_back({predictors[k].family(), config.predictors[k].name,
                                       predictors[k].architecture(),
                                       accuracy(predictors[k], scm, test_rows, config.outcome_threshold),
                                       test_rows.size()});
    }
    std::stable_sort(report.accuracy_table.begin(), report.accuracy_table.end(),
                     [](const AccuracyColumn& a, const AccuracyColumn& b) { return a.family < b.family; });
    return 0;
  });

  for (const auto& req : config.criteria) {
    step(req.criterion, [&] {
      std::vector<std::size_t> chosen;
      for (std::size_t k = 0; k < predictors.size(); ++k) {
        if (req.predictors.empty() ||
            std::find(req.predictors.begin(), req.predictors.end(), config.predictors[k].name) != req.predictors.end()) {
          chosen.push_back(k);
        }
      }
      std::vector<const Individual*> subjects;
      switch (req.scope) {
        case SubjectScope::kListed:
          for (const auto& id : req.subjects) subjects.push_back(&dataset[row_of(id, req.criterion)]);
          break;
        case SubjectScope::kAll:
          for (const auto& p : dataset) subjects.push_back(&p);
          break;
        case SubjectScope::kHeldout:
          for (std::size_t k : test_idx) subjects.push_back(&dataset[k]);
          break;
      }
      if (req.criterion == "t_contrast" && req.scope != SubjectScope::kListed) {
        std::erase_if(subjects, [&](const Individual* p) { return !p->snapshot_at(req.t) || !p->snapshot_at(req.t_prime); });
        if (subjects.empty()) conflict("t_contrast: no individual has snapshots at both ticks");
      }

      for (std::size_t k : chosen) {
        const Predictor& pred = predictors[k];
        const std::string& name = config.predictors[k].name;
        auto record = [&](Verdict v) {
          v.predictor = name;
          report.verdicts.push_back(std::move(v));
        };
        const std::string& c = req.criterion;
        const Tolerance& tol = req.tolerance;
        if (c == "counterfactual_fairness") {
          for (const auto* p : subjects) record(check_counterfactual_fairness(pred, scm, *p, tol));
        } else if (c == "d_contrast") {
          for (const auto* p : subjects) {
            std::string d;
            std::string d_prime;
            if (req.d) {
              d = *req.d;
              d_prime = *req.d_prime;
            } else {
              const ScoreVector s = predict(pred, scm, *p, p->label_snapshot());
              std::vector<std::size_t> rank(s.size());
              for (std::size_t r = 0; r < rank.size(); ++r) rank[r] = r;
              std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
              d = s.labels[rank[0]];
              d_prime = s.labels[rank[1]];
            }
            record(check_d_contrast(pred, scm, *p, d, d_prime, tol));
          }
        } else if (c == "t_contrast") {
          for (const auto* p : subjects) {
            record(check_t_contrast(pred, scm, *p, req.t, req.t_prime, *req.d, *req.d_prime, tol));
          }
        } else if (c == "i_contrast" || c == "contrast_margin") {
          for (const auto& pair : req.pairs) {
            const Individual& i = dataset[row_of(pair.i, c)];
            const Individual& j = dataset[row_of(pair.j, c)];
            Tolerance pair_tol = tol;
            if (pair.lambda_margin) pair_tol.lambda_margin = *pair.lambda_margin;
            record(c == "i_contrast" ? check_i_contrast(pred, scm, i, j, *req.d, *req.d_prime, pair_tol)
                                     : check_contrast_margin(pred, scm, i, j, *req.d, *req.d_prime, pair_tol));
          }
        } else {
          std::vector<Individual> rows;
          for (const auto* p : subjects) rows.push_back(*p);
          if (c == "demographic_parity") {
            record(check_demographic_parity(pred, scm, rows, req.group, tol));
          } else if (c == "equality_of_opportunity") {
            record(check_equality_of_opportunity(pred, scm, rows, req.group, req.favorable, tol,
                                                 config.outcome_threshold));
          } else {
            record(check_individual_fairness(pred, scm, rows, euclidean_observable_distance, req.pair_threshold,
                                             req.score_threshold));
          }
        }
      }
      return 0;
    });
  }
  return report;
}

AuditReport run_audit(const AuditConfig& config) {
  const CausalGraph graph = step("graph '" + config.graph_path.string() + "'", [&] { return load_graph(config.graph_path); });
  const std::vector<Individual> dataset =
      step("dataset '" + config.data_path.string() + "'", [&] { return load_dataset(config.data_path, graph); });
  return run_audit(config, graph, dataset);
}

}  // namespace contrafair
