#include "contrafair/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "contrafair/error.hpp"

namespace contrafair {

std::string_view to_string(Family family) noexcept {
  switch (family) {
    case Family::kFull: return "full";
    case Family::kUnaware: return "unaware";
    case Family::kCounterfactual: return "counterfactual";
    case Family::kContrastive: return "contrastive";
  }
  return "full";
}

std::string_view display_name(Family family) noexcept {
  switch (family) {
    case Family::kFull: return "Full";
    case Family::kUnaware: return "Unaware";
    case Family::kCounterfactual: return "Counterfactual";
    case Family::kContrastive: return "Contrastive";
  }
  return "Full";
}

Family parse_family(std::string_view text) {
  for (Family f : kAllFamilies) {
    if (text == to_string(f)) return f;
  }
  throw Error(ErrorCode::kParseError, "unknown predictor family '" + std::string(text) + "'");
}

DecisionSpace::DecisionSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
  std::set<std::string> distinct(labels_.begin(), labels_.end());
  if (labels_.size() < 2 || distinct.size() != labels_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "a decision space needs at least two distinct labels");
  }
}

bool DecisionSpace::contains(std::string_view label) const noexcept {
  return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

std::size_t DecisionSpace::index_of(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) {
    throw Error(ErrorCode::kInvalidArgument, "decision '" + std::string(label) + "' not in decision space");
  }
  return static_cast<std::size_t>(it - labels_.begin());
}

double ScoreVector::at(std::string_view label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) {
    throw Error(ErrorCode::kInvalidArgument, "decision '" + std::string(label) + "' not scored");
  }
  return values[static_cast<std::size_t>(it - labels.begin())];
}

double Feature::read(const World& world) const {
  const ValueMap* source_map = nullptr;
  switch (source) {
    case FeatureSource::kProtected: source_map = &world.protected_values; break;
    case FeatureSource::kObservable: source_map = &world.observables; break;
    case FeatureSource::kResidual: source_map = &world.latent.residuals; break;
  }
  auto it = source_map->find(variable);
  if (it == source_map->end()) throw Error(ErrorCode::kMissingValue, variable);
  if (level) return it->second == static_cast<double>(*level) ? 1.0 : 0.0;
  return it->second;
}

std::string feature_key(const CausalGraph& graph, const Feature& feature) {
  if (feature.source == FeatureSource::kResidual) return "eps:" + feature.variable;
  if (!feature.level) return feature.variable;
  return feature.variable + "=" + graph.at(feature.variable).levels.at(static_cast<std::size_t>(*feature.level));
}

std::vector<Feature> default_inputs(Family family, const CausalGraph& graph) {
  std::vector<std::string> observables;
  for (const auto& name : graph.topological_order()) {
    if (graph.at(name).role == Role::kObservable) observables.push_back(name);
  }
  std::vector<Feature> inputs;
  const FeatureSource observed =
      family == Family::kCounterfactual ? FeatureSource::kResidual : FeatureSource::kObservable;
  for (const auto& name : observables) inputs.push_back({observed, name, std::nullopt});
  if (family == Family::kFull || family == Family::kContrastive) {
    for (const auto* spec : graph.with_role(Role::kProtected)) {
      if (!spec->categorical()) {
        inputs.push_back({FeatureSource::kProtected, spec->name, std::nullopt});
        continue;
      }
      for (int level = 1; level < static_cast<int>(spec->levels.size()); ++level) {
        inputs.push_back({FeatureSource::kProtected, spec->name, level});
      }
    }
  }
  return inputs;
}

std::size_t logit_count(std::size_t decisions) noexcept { return decisions == 2 ? 1 : decisions; }

Network Network::zeros(std::size_t inputs, std::size_t hidden, std::size_t outputs) {
  Network net;
  net.inputs = inputs;
  net.hidden = hidden;
  net.outputs = outputs;
  net.w1.assign(hidden * inputs, 0.0);
  net.b1.assign(hidden, 0.0);
  net.w2.assign(outputs * (hidden ? hidden : inputs), 0.0);
  net.b2.assign(outputs, 0.0);
  return net;
}

std::size_t Network::parameter_count() const noexcept {
  return w1.size() + b1.size() + w2.size() + b2.size();
}

std::vector<double> Network::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto* part : {&w1, &b1, &w2, &b2}) out.insert(out.end(), part->begin(), part->end());
  return out;
}

void Network::assign(std::span<const double> parameters) {
  if (parameters.size() != parameter_count()) {
    throw Error(ErrorCode::kSchemaMismatch, "parameter vector has the wrong length");
  }
  auto cursor = parameters.begin();
  for (auto* part : {&w1, &b1, &w2, &b2}) {
    std::copy_n(cursor, part->size(), part->begin());
    cursor += static_cast<std::ptrdiff_t>(part->size());
  }
}

Predictor::Predictor(Family family, DecisionSpace decisions, std::vector<Feature> inputs, Network network,
                     std::optional<TrainConfig> train_config, std::map<std::string, double> metrics)
    : family_(family),
      decisions_(std::move(decisions)),
      inputs_(std::move(inputs)),
      network_(std::move(network)),
      train_config_(std::move(train_config)),
      metrics_(std::move(metrics)) {
  if (decisions_.size() < 2) throw Error(ErrorCode::kSchemaMismatch, "predictor without a decision space");
  for (const auto& f : inputs_) {
    const bool ok = [&] {
      switch (family_) {
        case Family::kUnaware: return f.source == FeatureSource::kObservable;
        case Family::kCounterfactual: return f.source == FeatureSource::kResidual;
        case Family::kFull:
        case Family::kContrastive: return f.source != FeatureSource::kResidual;
      }
      return false;
    }();
    if (!ok) {
      throw Error(ErrorCode::kSchemaMismatch, std::string(to_string(family_)) +
                                                  " predictor cannot read input '" + f.variable + "'");
    }
    if (!std::isfinite(f.shift) || !std::isfinite(f.scale) || f.scale <= 0.0) {
      throw Error(ErrorCode::kSchemaMismatch, "input '" + f.variable + "' has invalid standardization");
    }
  }
  const Network& n = network_;
  const std::size_t fan_in = n.hidden ? n.hidden : n.inputs;
  if (n.inputs != inputs_.size() || n.outputs != logit_count(decisions_.size()) ||
      n.w1.size() != n.hidden * n.inputs || n.b1.size() != n.hidden ||
      n.w2.size() != n.outputs * fan_in || n.b2.size() != n.outputs) {
    throw Error(ErrorCode::kSchemaMismatch, "network shape does not match inputs and decisions");
  }
  if (n.hidden > 0 && family_ != Family::kContrastive) {
    throw Error(ErrorCode::kSchemaMismatch, "only the contrastive family has a hidden layer");
  }
  for (double v : n.flatten()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kSchemaMismatch, "non-finite network parameter");
  }
}

std::string Predictor::architecture() const {
  if (network_.hidden == 0) {
    return decisions_.size() == 2 ? "logistic regression" : "softmax regression";
  }
  return "one hidden layer (tanh, width " + std::to_string(network_.hidden) + ")";
}

std::vector<double> Predictor::encode(const World& world) const {
  std::vector<double> x;
  x.reserve(inputs_.size());
  for (const auto& f : inputs_) x.push_back((f.read(world) - f.shift) / f.scale);
  return x;
}

namespace {

double logistic(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

ScoreVector Predictor::score_encoded(std::span<const double> x) const {
  const Network& n = network_;
  if (x.size() != n.inputs) throw Error(ErrorCode::kSchemaMismatch, "encoded input has the wrong length");
  std::vector<double> layer(x.begin(), x.end());
  if (n.hidden > 0) {
    std::vector<double> h(n.hidden);
    for (std::size_t j = 0; j < n.hidden; ++j) {
      double a = n.b1[j];
      for (std::size_t i = 0; i < n.inputs; ++i) a += n.w1[j * n.inputs + i] * x[i];
      h[j] = std::tanh(a);
    }
    layer = std::move(h);
  }
  std::vector<double> z(n.outputs);
  for (std::size_t o = 0; o < n.outputs; ++o) {
    double a = n.b2[o];
    for (std::size_t i = 0; i < layer.size(); ++i) a += n.w2[o * layer.size() + i] * layer[i];
    z[o] = a;
  }

  ScoreVector out{decisions_.labels(), std::vector<double>(decisions_.size())};
  if (decisions_.size() == 2) {
    const double p = logistic(z[0]);
    out.values[1] = p;
    out.values[0] = 1.0 - p;
    return out;
  }
  const double top = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (std::size_t d = 0; d < z.size(); ++d) total += (out.values[d] = std::exp(z[d] - top));
  for (double& v : out.values) v /= total;
  return out;
}

ScoreVector Predictor::score(const World& world) const { return score_encoded(encode(world)); }

Predictor Predictor::with_metrics(std::map<std::string, double> metrics) const {
  Predictor copy = *this;
  copy.metrics_ = std::move(metrics);
  return copy;
}

Predictor linear_predictor(Family family, const CausalGraph& graph, DecisionSpace decisions,
                           const std::map<std::string, double>& weights, double bias) {
  if (decisions.size() != 2) {
    throw Error(ErrorCode::kInvalidArgument, "hand-set linear predictors are binary");
  }
  std::vector<Feature> inputs = default_inputs(family, graph);
  Network net = Network::zeros(inputs.size(), 0, 1);
  std::set<std::string> used;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::string key = feature_key(graph, inputs[i]);
    if (auto it = weights.find(key); it != weights.end()) {
      net.w2[i] = it->second;
      used.insert(key);
    }
  }
  for (const auto& [key, w] : weights) {
    if (!used.contains(key)) {
      throw Error(ErrorCode::kSchemaMismatch,
                  std::string(to_string(family)) + " predictor has no input '" + key + "'");
    }
  }
  net.b2[0] = bias;
  return Predictor(family, std::move(decisions), std::move(inputs), std::move(net));
}

ScoreVector predict(const Predictor& predictor, const FittedScm& scm, const Individual& individual,
                    std::size_t snapshot_index) {
  return predictor.score(factual_world(scm, individual, snapshot_index));
}

ScoreVector counterfactual_score(const Predictor& predictor, const FittedScm& scm,
                                 const Individual& individual, std::size_t snapshot_index,
                                 const Intervention& intervention) {
  return predictor.score(counterfactual_world(scm, individual, snapshot_index, intervention));
}

double contrastive_penalty(const Predictor& predictor, const FittedScm& scm,
                           std::span<const Individual> batch, std::span<const Intervention> interventions,
                           const ProtectedGrid& grid) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyBatch, "contrastive penalty over an empty batch");
  std::vector<Intervention> enumerated;
  if (interventions.empty()) {
    enumerated = enumerate_interventions(scm.graph(), grid);
    interventions = enumerated;
  }
  double total = 0.0;
  for (const auto& individual : batch) {
    const std::size_t snap = individual.label_snapshot();
    const ScoreVector factual = predict(predictor, scm, individual, snap);
    for (const auto& intervention : interventions) {
      const ScoreVector moved = counterfactual_score(predictor, scm, individual, snap, intervention);
      double worst = 0.0;
      for (std::size_t d = 0; d < factual.size(); ++d) {
        worst = std::max(worst, std::abs(factual[d] - moved[d]));
      }
      total += worst;
    }
  }
  return total / static_cast<double>(batch.size() * interventions.size());
}

std::size_t decision_for_outcome(const CausalGraph& graph, const DecisionSpace& decisions,
                                 std::optional<double> threshold, double outcome) {
  auto outcomes = graph.with_role(Role::kOutcome);
  if (outcomes.empty()) throw Error(ErrorCode::kSchemaMismatch, "graph declares no outcome");
  const VariableSpec& spec = *outcomes.front();
  if (spec.categorical()) {
    if (!spec.admits(outcome)) throw Error(ErrorCode::kDomainViolation, "outcome " + spec.name);
    const std::string& label = spec.levels[static_cast<std::size_t>(outcome)];
    if (!decisions.contains(label)) {
      throw Error(ErrorCode::kSchemaMismatch, "outcome level '" + label + "' is not a decision label");
    }
    return decisions.index_of(label);
  }
  if (!threshold) {
    throw Error(ErrorCode::kSchemaMismatch,
                "continuous outcome '" + spec.name + "' needs a binarization threshold");
  }
  if (decisions.size() != 2) {
    throw Error(ErrorCode::kSchemaMismatch, "thresholded outcomes need a binary decision space");
  }
  return outcome >= *threshold ? 1 : 0;
}

double accuracy(const Predictor& predictor, const FittedScm& scm, std::span<const Individual> rows,
                std::optional<double> threshold) {
  if (rows.empty()) throw Error(ErrorCode::kEmptyBatch, "accuracy over no rows");
  std::size_t hits = 0;
  for (const auto& individual : rows) {
    if (!individual.outcome) throw Error(ErrorCode::kMissingOutcome, individual.id);
    const std::size_t truth =
        decision_for_outcome(scm.graph(), predictor.decisions(), threshold, *individual.outcome);
    const ScoreVector s = predict(predictor, scm, individual, individual.label_snapshot());
    const auto best = static_cast<std::size_t>(
        std::max_element(s.values.begin(), s.values.end()) - s.values.begin());
    hits += best == truth ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

}  // namespace contrafair
