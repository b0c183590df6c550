#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "contrafair/graph.hpp"
#include "contrafair/individual.hpp"

namespace contrafair {

// One regressor of a structural equation. Continuous parents contribute their
// value; categorical parents contribute one indicator per non-reference level.
struct Term {
  std::string parent;
  std::optional<int> level;
  double weight = 0.0;

  double regressor(double parent_value) const noexcept {
    if (!level) return parent_value;
    return parent_value == static_cast<double>(*level) ? 1.0 : 0.0;
  }
};

// child = intercept + sum(weight * regressor(parent)) + noise, noise ~ N(0, noise_std^2)
struct StructuralEquation {
  std::string child;
  double intercept = 0.0;
  std::vector<Term> terms;
  double noise_std = 0.0;

  // Noise-free part evaluated on `values`, which must hold every parent.
  double mean(const ValueMap& values) const;
};

struct FitStats {
  double residual_variance = 0.0;
  std::size_t samples = 0;
};

// The regressors an equation for `child` must carry, weights zeroed, in
// canonical order (parents by edge order, levels ascending, reference dropped).
std::vector<Term> expected_terms(const CausalGraph& graph, std::string_view child);

// Text key of a term in serialized weight maps: "X" or "R=level_label".
std::string term_key(const CausalGraph& graph, const Term& term);

// Immutable fitted model. Holds one equation per observable (the feature
// equations) and optionally one for the outcome, which never takes part in
// counterfactual feature propagation.
class FittedScm {
 public:
  FittedScm(CausalGraph graph, std::map<std::string, StructuralEquation> equations,
            std::map<std::string, FitStats> fit_stats = {});

  const CausalGraph& graph() const noexcept { return graph_; }
  const std::map<std::string, StructuralEquation>& equations() const noexcept { return equations_; }
  const std::map<std::string, FitStats>& fit_stats() const noexcept { return fit_stats_; }

  const StructuralEquation& equation(std::string_view child) const;

  // Protected variables in declaration order.
  const std::vector<std::string>& protected_names() const noexcept { return protected_; }
  // Observable variables in topological order; also the feature-equation order.
  const std::vector<std::string>& observable_names() const noexcept { return observables_; }
  const std::optional<std::string>& outcome_name() const noexcept { return outcome_; }
  const StructuralEquation* outcome_equation() const noexcept;

 private:
  CausalGraph graph_;
  std::map<std::string, StructuralEquation> equations_;
  std::map<std::string, FitStats> fit_stats_;
  std::vector<std::string> protected_;
  std::vector<std::string> observables_;
  std::optional<std::string> outcome_;
};

// Structural checks of one individual against a graph: every protected and
// observable value present and inside its domain, snapshot times strictly
// increasing, identical observable sets across snapshots.
void validate_individual(const CausalGraph& graph, const Individual& individual);

// Rejects keys that are not protected variables and out-of-domain values.
void validate_intervention(const FittedScm& scm, const Intervention& intervention);

// Ordinary least squares per observable (and the outcome when every row
// carries a continuous one). Rows are all snapshots for feature equations and
// the label snapshot for the outcome equation.
FittedScm fit_scm(const CausalGraph& graph, std::span<const Individual> dataset);

LatentAssignment abduct(const FittedScm& scm, const Individual& individual,
                        std::size_t snapshot_index);

// Prediction step: observables recomputed in topological order from protected
// values and fixed residuals.
Snapshot propagate(const FittedScm& scm, const ValueMap& protected_values,
                   const LatentAssignment& latent, std::int64_t time);

// Abduction, action, prediction.
Snapshot counterfactual(const FittedScm& scm, const Individual& individual,
                        std::size_t snapshot_index, const Intervention& intervention);

World factual_world(const FittedScm& scm, const Individual& individual,
                    std::size_t snapshot_index);

// Counterfactual world that reuses the factual residuals verbatim.
World counterfactual_world(const FittedScm& scm, const Individual& individual,
                           std::size_t snapshot_index, const Intervention& intervention);

}  // namespace contrafair

namespace contrafair {

// Candidate values for continuous protected variables, which cannot be
// enumerated from their domain alone.
using ProtectedGrid = std::map<std::string, std::vector<double>, std::less<>>;

// Cartesian product of every protected variable's levels (or grid values), in
// declaration order with the last variable varying fastest. Throws
// ContinuousProtectedUnenumerable when a continuous variable has no grid.
std::vector<Intervention> enumerate_interventions(const CausalGraph& graph,
                                                  const ProtectedGrid& grid = {});

// "R=white,S=female" style rendering of an intervention.
std::string describe(const CausalGraph& graph, const Intervention& intervention);

}  // namespace contrafair
