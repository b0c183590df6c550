#include "contrafair/serialization.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "contrafair/error.hpp"

namespace contrafair {
namespace {

const Json& require(const Json& doc, const char* key, const std::string& context) {
  if (!doc.is_object()) throw Error(ErrorCode::kParseError, context + ": expected an object");
  auto it = doc.find(key);
  if (it == doc.end()) throw Error(ErrorCode::kParseError, context + ": missing key '" + key + "'");
  return *it;
}

double number(const Json& value, const std::string& context) {
  if (!value.is_number()) throw Error(ErrorCode::kParseError, context + ": expected a number");
  const double v = value.get<double>();
  if (!std::isfinite(v)) throw Error(ErrorCode::kParseError, context + ": non-finite number");
  return v;
}

std::vector<double> numbers(const Json& value, const std::string& context) {
  if (!value.is_array()) throw Error(ErrorCode::kParseError, context + ": expected an array");
  std::vector<double> out;
  out.reserve(value.size());
  for (const auto& v : value) out.push_back(number(v, context));
  return out;
}

template <typename Fn>
auto translate(const std::string& context, Fn&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, context + ": " + e.what());
  }
}

Json grid_to_json(const ProtectedGrid& grid) {
  Json out = Json::object();
  for (const auto& [name, values] : grid) out[name] = values;
  return out;
}

ProtectedGrid grid_from_json(const Json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::kParseError, "grid: expected an object");
  ProtectedGrid grid;
  for (const auto& [name, values] : doc.items()) grid.emplace(name, numbers(values, "grid." + name));
  return grid;
}

std::string_view source_name(FeatureSource source) {
  switch (source) {
    case FeatureSource::kProtected: return "protected";
    case FeatureSource::kObservable: return "observable";
    case FeatureSource::kResidual: return "residual";
  }
  return "observable";
}

FeatureSource parse_source(const std::string& text) {
  if (text == "protected") return FeatureSource::kProtected;
  if (text == "observable") return FeatureSource::kObservable;
  if (text == "residual") return FeatureSource::kResidual;
  throw Error(ErrorCode::kParseError, "unknown input source '" + text + "'");
}

}  // namespace

Json to_json(const CausalGraph& graph) {
  Json variables = Json::array();
  for (const auto& spec : graph.variables()) {
    Json v;
    v["name"] = spec.name;
    v["role"] = std::string(to_string(spec.role));
    v["domain"] = spec.categorical() ? "categorical" : "continuous";
    if (spec.categorical()) v["levels"] = spec.levels;
    variables.push_back(std::move(v));
  }
  Json edges = Json::array();
  for (const auto& e : graph.edges()) edges.push_back(Json::array({e.parent, e.child}));
  Json out;
  out["variables"] = std::move(variables);
  out["edges"] = std::move(edges);
  return out;
}

CausalGraph graph_from_json(const Json& doc) {
  return translate("graph", [&] {
    std::vector<VariableSpec> variables;
    const Json& vars = require(doc, "variables", "graph");
    if (!vars.is_array()) throw Error(ErrorCode::kParseError, "graph.variables: expected an array");
    for (const auto& v : vars) {
      VariableSpec spec;
      spec.name = require(v, "name", "graph.variables").get<std::string>();
      const std::string context = "variable '" + spec.name + "'";
      spec.role = parse_role(require(v, "role", context).get<std::string>());
      const std::string domain = v.value("domain", v.contains("levels") ? "categorical" : "continuous");
      if (domain == "categorical") {
        spec.levels = require(v, "levels", context).get<std::vector<std::string>>();
        if (spec.levels.empty()) throw Error(ErrorCode::kInvalidDomain, context + ": empty level list");
      } else if (domain == "continuous") {
        if (v.contains("levels") && !v["levels"].empty()) {
          throw Error(ErrorCode::kInvalidDomain, context + ": continuous variable with levels");
        }
      } else {
        throw Error(ErrorCode::kInvalidDomain, context + ": unknown domain '" + domain + "'");
      }
      variables.push_back(std::move(spec));
    }
    std::vector<Edge> edges;
    const Json& list = require(doc, "edges", "graph");
    if (!list.is_array()) throw Error(ErrorCode::kParseError, "graph.edges: expected an array");
    for (const auto& e : list) {
      if (!e.is_array() || e.size() != 2) {
        throw Error(ErrorCode::kParseError, "graph.edges: each edge is a [parent, child] pair");
      }
      edges.push_back({e[0].get<std::string>(), e[1].get<std::string>()});
    }
    CausalGraph graph(std::move(variables), std::move(edges));
    validate_graph(graph);
    return graph;
  });
}

Json to_json(const FittedScm& scm) {
  Json out = to_json(scm.graph());
  Json equations = Json::object();
  for (const auto& spec : scm.graph().variables()) {
    auto it = scm.equations().find(spec.name);
    if (it == scm.equations().end()) continue;
    const StructuralEquation& eq = it->second;
    Json weights = Json::object();
    for (const auto& term : eq.terms) weights[term_key(scm.graph(), term)] = term.weight;
    Json e;
    e["intercept"] = eq.intercept;
    e["weights"] = std::move(weights);
    e["noise_std"] = eq.noise_std;
    equations[spec.name] = std::move(e);
  }
  out["equations"] = std::move(equations);
  if (!scm.fit_stats().empty()) {
    Json stats = Json::object();
    for (const auto& spec : scm.graph().variables()) {
      auto it = scm.fit_stats().find(spec.name);
      if (it == scm.fit_stats().end()) continue;
      stats[spec.name] = {{"residual_variance", it->second.residual_variance}, {"samples", it->second.samples}};
    }
    out["fit_stats"] = std::move(stats);
  }
  return out;
}

FittedScm scm_from_json(const Json& doc) {
  CausalGraph graph = graph_from_json(doc);
  return translate("scm", [&] {
    std::map<std::string, StructuralEquation> equations;
    const Json& list = require(doc, "equations", "scm");
    if (!list.is_object()) throw Error(ErrorCode::kParseError, "scm.equations: expected an object");
    for (const auto& [child, body] : list.items()) {
      const std::string context = "equation '" + child + "'";
      if (graph.find(child) == nullptr) throw Error(ErrorCode::kSchemaMismatch, context + ": unknown variable");
      StructuralEquation eq;
      eq.child = child;
      eq.intercept = number(require(body, "intercept", context), context + ".intercept");
      eq.noise_std = number(require(body, "noise_std", context), context + ".noise_std");
      eq.terms = expected_terms(graph, child);
      const Json& weights = require(body, "weights", context);
      if (!weights.is_object() || weights.size() != eq.terms.size()) {
        throw Error(ErrorCode::kSchemaMismatch, context + ": weights must cover exactly the parent terms");
      }
      for (auto& term : eq.terms) {
        const std::string key = term_key(graph, term);
        auto w = weights.find(key);
        if (w == weights.end()) throw Error(ErrorCode::kSchemaMismatch, context + ": missing weight '" + key + "'");
        term.weight = number(*w, context + "." + key);
      }
      equations.emplace(child, std::move(eq));
    }
    std::map<std::string, FitStats> stats;
    if (auto it = doc.find("fit_stats"); it != doc.end()) {
      for (const auto& [child, body] : it->items()) {
        stats[child] = {number(require(body, "residual_variance", child), child),
                        require(body, "samples", child).get<std::size_t>()};
      }
    }
    return FittedScm(std::move(graph), std::move(equations), std::move(stats));
  });
}

Json to_json(const TrainConfig& config) {
  Json out;
  out["family"] = std::string(to_string(config.family));
  out["learning_rate"] = config.learning_rate;
  out["final_lr_fraction"] = config.final_lr_fraction;
  out["epochs"] = config.epochs;
  out["penalty_weight"] = config.penalty_weight;
  out["hidden_width"] = config.hidden_width;
  out["seed"] = config.seed;
  out["l2"] = config.l2;
  out["outcome_threshold"] = config.outcome_threshold ? Json(*config.outcome_threshold) : Json(nullptr);
  out["grid"] = grid_to_json(config.grid);
  return out;
}

TrainConfig train_config_from_json(const Json& doc, const TrainConfig& defaults) {
  return translate("train_config", [&] {
    if (!doc.is_object()) throw Error(ErrorCode::kParseError, "train_config: expected an object");
    TrainConfig config = defaults;
    for (const auto& [key, value] : doc.items()) {
      const std::string context = "train_config." + key;
      if (key == "family") {
        config.family = parse_family(value.get<std::string>());
      } else if (key == "learning_rate") {
        config.learning_rate = number(value, context);
      } else if (key == "final_lr_fraction") {
        config.final_lr_fraction = number(value, context);
      } else if (key == "epochs") {
        config.epochs = value.get<int>();
      } else if (key == "penalty_weight") {
        config.penalty_weight = number(value, context);
      } else if (key == "hidden_width") {
        config.hidden_width = value.get<int>();
      } else if (key == "seed") {
        config.seed = value.get<std::uint64_t>();
      } else if (key == "l2") {
        config.l2 = number(value, context);
      } else if (key == "outcome_threshold") {
        if (value.is_null()) {
          config.outcome_threshold.reset();
        } else {
          config.outcome_threshold = number(value, context);
        }
      } else if (key == "grid") {
        config.grid = grid_from_json(value);
      } else {
        throw Error(ErrorCode::kParseError, "train_config: unknown key '" + key + "'");
      }
    }
    config.validate();
    return config;
  });
}

Json to_json(const Predictor& predictor, const CausalGraph& graph) {
  Json out;
  out["family"] = std::string(to_string(predictor.family()));
  out["decision_space"] = predictor.decisions().labels();
  Json inputs = Json::array();
  for (const auto& f : predictor.inputs()) {
    Json item;
    item["key"] = feature_key(graph, f);
    item["source"] = std::string(source_name(f.source));
    item["variable"] = f.variable;
    item["level"] = f.level ? Json(*f.level) : Json(nullptr);
    item["shift"] = f.shift;
    item["scale"] = f.scale;
    inputs.push_back(std::move(item));
  }
  out["input_schema"] = std::move(inputs);
  const Network& net = predictor.network();
  Json params;
  params["hidden_width"] = net.hidden;
  params["w1"] = net.w1;
  params["b1"] = net.b1;
  params["w2"] = net.w2;
  params["b2"] = net.b2;
  out["parameters"] = std::move(params);
  out["train_config"] = predictor.train_config() ? to_json(*predictor.train_config()) : Json(nullptr);
  Json metrics = Json::object();
  for (const auto& [name, value] : predictor.metrics()) metrics[name] = value;
  out["metrics"] = std::move(metrics);
  return out;
}

Predictor predictor_from_json(const Json& doc) {
  return translate("predictor", [&] {
    const Family family = parse_family(require(doc, "family", "predictor").get<std::string>());
    DecisionSpace decisions(require(doc, "decision_space", "predictor").get<std::vector<std::string>>());
    std::vector<Feature> inputs;
    const Json& schema = require(doc, "input_schema", "predictor");
    if (!schema.is_array()) throw Error(ErrorCode::kParseError, "predictor.input_schema: expected an array");
    for (const auto& item : schema) {
      Feature f;
      f.source = parse_source(require(item, "source", "input").get<std::string>());
      f.variable = require(item, "variable", "input").get<std::string>();
      if (auto it = item.find("level"); it != item.end() && !it->is_null()) f.level = it->get<int>();
      f.shift = number(item.value("shift", Json(0.0)), "input.shift");
      f.scale = number(item.value("scale", Json(1.0)), "input.scale");
      inputs.push_back(std::move(f));
    }
    const Json& params = require(doc, "parameters", "predictor");
    Network net;
    net.inputs = inputs.size();
    net.hidden = require(params, "hidden_width", "parameters").get<std::size_t>();
    net.outputs = logit_count(decisions.size());
    net.w1 = numbers(require(params, "w1", "parameters"), "parameters.w1");
    net.b1 = numbers(require(params, "b1", "parameters"), "parameters.b1");
    net.w2 = numbers(require(params, "w2", "parameters"), "parameters.w2");
    net.b2 = numbers(require(params, "b2", "parameters"), "parameters.b2");
    std::optional<TrainConfig> config;
    if (auto it = doc.find("train_config"); it != doc.end() && !it->is_null()) {
      TrainConfig defaults;
      defaults.family = family;
      config = train_config_from_json(*it, defaults);
    }
    std::map<std::string, double> metrics;
    if (auto it = doc.find("metrics"); it != doc.end()) {
      for (const auto& [name, value] : it->items()) metrics[name] = number(value, "metrics." + name);
    }
    return Predictor(family, std::move(decisions), std::move(inputs), std::move(net), std::move(config),
                     std::move(metrics));
  });
}

void check_predictor_inputs(const Predictor& predictor, const CausalGraph& graph) {
  for (const auto& f : predictor.inputs()) {
    const VariableSpec* spec = graph.find(f.variable);
    const Role expected = f.source == FeatureSource::kProtected ? Role::kProtected : Role::kObservable;
    if (spec == nullptr || spec->role != expected) {
      throw Error(ErrorCode::kSchemaMismatch, "predictor input '" + f.variable + "' does not match the graph");
    }
    if (f.level && (!spec->categorical() || *f.level < 1 ||
                    static_cast<std::size_t>(*f.level) >= spec->levels.size())) {
      throw Error(ErrorCode::kSchemaMismatch, "predictor input '" + f.variable + "' has an invalid level");
    }
    if (!f.level && spec->categorical()) {
      throw Error(ErrorCode::kSchemaMismatch, "categorical input '" + f.variable + "' needs a level");
    }
  }
}

std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "write failed for '" + path.string() + "'");
}

CausalGraph load_graph(const std::filesystem::path& path) { return graph_from_json(read_json(path)); }
FittedScm load_scm(const std::filesystem::path& path) { return scm_from_json(read_json(path)); }
Predictor load_predictor(const std::filesystem::path& path) { return predictor_from_json(read_json(path)); }

}  // namespace contrafair
