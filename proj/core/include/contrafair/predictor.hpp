#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "contrafair/individual.hpp"
#include "contrafair/scm.hpp"

namespace contrafair {

// The four predictor families compared in the accuracy table.
//   full:           observables and protected attributes
//   unaware:        observables only
//   counterfactual: abducted residuals only (intervention-invariant)
//   contrastive:    observables and protected attributes, trained with the
//                   counterfactual contrast penalty
enum class Family { kFull, kUnaware, kCounterfactual, kContrastive };

std::string_view to_string(Family family) noexcept;
// Column title used in reports: "Full", "Unaware", ...
std::string_view display_name(Family family) noexcept;
Family parse_family(std::string_view text);
inline constexpr Family kAllFamilies[] = {Family::kFull, Family::kUnaware, Family::kCounterfactual,
                                          Family::kContrastive};

class DecisionSpace {
 public:
  DecisionSpace() = default;
  explicit DecisionSpace(std::vector<std::string> labels);

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }
  bool contains(std::string_view label) const noexcept;
  std::size_t index_of(std::string_view label) const;

  friend bool operator==(const DecisionSpace&, const DecisionSpace&) = default;

 private:
  std::vector<std::string> labels_;
};

// Normalized scores over a decision space, aligned with its label order.
struct ScoreVector {
  std::vector<std::string> labels;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double at(std::string_view label) const;
};

enum class FeatureSource { kProtected, kObservable, kResidual };

// One model input with its standardization (value - shift) / scale.
struct Feature {
  FeatureSource source = FeatureSource::kObservable;
  std::string variable;
  std::optional<int> level;  // one-hot indicator for categorical protected inputs
  double shift = 0.0;
  double scale = 1.0;

  double read(const World& world) const;
  friend bool operator==(const Feature&, const Feature&) = default;
};

// Key used in parameter files and hand-set weights: "X", "R=level" or "eps:X".
std::string feature_key(const CausalGraph& graph, const Feature& feature);

// Inputs a family reads for `graph`, unstandardized.
std::vector<Feature> default_inputs(Family family, const CausalGraph& graph);

// Linear or one-hidden-layer tanh network. Weight matrices are row-major.
// A binary decision space uses one logit (score of the second label is the
// logistic of it); larger spaces use one logit per decision and softmax.
struct Network {
  std::size_t inputs = 0;
  std::size_t hidden = 0;
  std::size_t outputs = 0;
  std::vector<double> w1;  // hidden x inputs (empty when hidden == 0)
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // outputs x (hidden ? hidden : inputs)
  std::vector<double> b2;  // outputs

  static Network zeros(std::size_t inputs, std::size_t hidden, std::size_t outputs);
  std::size_t parameter_count() const noexcept;
  // Packing order: w1, b1, w2, b2.
  std::vector<double> flatten() const;
  void assign(std::span<const double> parameters);

  friend bool operator==(const Network&, const Network&) = default;
};

std::size_t logit_count(std::size_t decisions) noexcept;

struct TrainConfig {
  Family family = Family::kFull;
  double learning_rate = 0.5;
  // The step decays geometrically from learning_rate to
  // learning_rate * final_lr_fraction over the run.
  double final_lr_fraction = 1e-3;
  int epochs = 1000;
  double penalty_weight = 0.0;  // contrastive family only
  int hidden_width = 0;
  std::uint64_t seed = 0;
  double l2 = 1e-3;
  // Required when the outcome is continuous: outcome >= threshold maps to the
  // second decision label, anything below to the first.
  std::optional<double> outcome_threshold;
  // Grid for continuous protected variables inside the penalty.
  ProtectedGrid grid;

  void validate() const;
};

class Predictor {
 public:
  Predictor(Family family, DecisionSpace decisions, std::vector<Feature> inputs, Network network,
            std::optional<TrainConfig> train_config = std::nullopt,
            std::map<std::string, double> metrics = {});

  Family family() const noexcept { return family_; }
  const DecisionSpace& decisions() const noexcept { return decisions_; }
  const std::vector<Feature>& inputs() const noexcept { return inputs_; }
  const Network& network() const noexcept { return network_; }
  const std::optional<TrainConfig>& train_config() const noexcept { return train_config_; }
  const std::map<std::string, double>& metrics() const noexcept { return metrics_; }
  std::string architecture() const;

  // Standardized input vector for a world.
  std::vector<double> encode(const World& world) const;
  ScoreVector score(const World& world) const;
  ScoreVector score_encoded(std::span<const double> encoded) const;

  Predictor with_metrics(std::map<std::string, double> metrics) const;

 private:
  Family family_;
  DecisionSpace decisions_;
  std::vector<Feature> inputs_;
  Network network_;
  std::optional<TrainConfig> train_config_;
  std::map<std::string, double> metrics_;
};

// Binary predictor with one hand-set logit: bias + sum(weights[key] * input).
// Unlisted inputs get weight 0; unknown keys are rejected.
Predictor linear_predictor(Family family, const CausalGraph& graph, DecisionSpace decisions,
                           const std::map<std::string, double>& weights, double bias);

ScoreVector predict(const Predictor& predictor, const FittedScm& scm, const Individual& individual,
                    std::size_t snapshot_index);

ScoreVector counterfactual_score(const Predictor& predictor, const FittedScm& scm,
                                 const Individual& individual, std::size_t snapshot_index,
                                 const Intervention& intervention);

// Mean over (individual, intervention) of the largest per-decision absolute
// score change, evaluated on each individual's label snapshot. An empty
// intervention list means the full protected domain.
double contrastive_penalty(const Predictor& predictor, const FittedScm& scm,
                           std::span<const Individual> batch,
                           std::span<const Intervention> interventions = {},
                           const ProtectedGrid& grid = {});

// Decision index an observed outcome corresponds to.
std::size_t decision_for_outcome(const CausalGraph& graph, const DecisionSpace& decisions,
                                 std::optional<double> threshold, double outcome);

// Fraction of individuals whose arg-max decision matches the observed outcome.
double accuracy(const Predictor& predictor, const FittedScm& scm, std::span<const Individual> rows,
                std::optional<double> threshold);

// Penalized training objective, exposed for gradient checking:
//   mean cross-entropy + l2/2 * |weights|^2 + penalty_weight * penalty
class TrainingObjective {
 public:
  TrainingObjective(const TrainConfig& config, const FittedScm& scm,
                    std::span<const Individual> dataset, const DecisionSpace& decisions);
  ~TrainingObjective();
  TrainingObjective(TrainingObjective&&) noexcept;
  TrainingObjective& operator=(TrainingObjective&&) noexcept;

  std::size_t parameter_count() const noexcept;
  std::vector<double> initial_parameters() const;
  // Objective value; fills `gradient` when it is non-empty.
  double evaluate(std::span<const double> parameters, std::span<double> gradient = {}) const;
  // Unweighted penalty term at `parameters` on the training rows.
  double penalty(std::span<const double> parameters) const;
  Predictor make_predictor(std::span<const double> parameters) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Full-batch gradient descent on TrainingObjective. Deterministic for a given
// config, seed and dataset.
Predictor train(const TrainConfig& config, const FittedScm& scm, std::span<const Individual> dataset,
                const DecisionSpace& decisions);

}  // namespace contrafair
