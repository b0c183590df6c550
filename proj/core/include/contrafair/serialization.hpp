#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "contrafair/graph.hpp"
#include "contrafair/predictor.hpp"
#include "contrafair/scm.hpp"

namespace contrafair {

using Json = nlohmann::ordered_json;

// Graph spec: {"variables": [{name, role, domain, levels?}], "edges": [[p, c]]}.
Json to_json(const CausalGraph& graph);
CausalGraph graph_from_json(const Json& doc);

// Graph spec plus "equations": {child: {intercept, weights, noise_std}} and
// "fit_stats": {child: {residual_variance, samples}}.
Json to_json(const FittedScm& scm);
FittedScm scm_from_json(const Json& doc);

Json to_json(const TrainConfig& config);
// Missing keys keep the values of `defaults`.
TrainConfig train_config_from_json(const Json& doc, const TrainConfig& defaults = {});

// {family, decision_space, input_schema, parameters, train_config, metrics}.
// The graph supplies readable input keys.
Json to_json(const Predictor& predictor, const CausalGraph& graph);
Predictor predictor_from_json(const Json& doc);

// Every input of `predictor` names a variable of `graph` with a matching role
// and level. Throws SchemaMismatch.
void check_predictor_inputs(const Predictor& predictor, const CausalGraph& graph);

// Two-space indented JSON followed by a newline.
std::string dump(const Json& doc);

Json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

CausalGraph load_graph(const std::filesystem::path& path);
FittedScm load_scm(const std::filesystem::path& path);
Predictor load_predictor(const std::filesystem::path& path);

}  // namespace contrafair
