#include "contrafair/scm.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

#include "contrafair/error.hpp"

namespace contrafair {
namespace {

constexpr double kMaxCondition = 1e12;

double lookup(const ValueMap& values, const std::string& name) {
  auto it = values.find(name);
  if (it == values.end()) throw Error(ErrorCode::kMissingValue, name);
  return it->second;
}

// Solves min ||X b - y|| through the normal equations. The condition number
// of X'X is taken from its eigenvalues.
Eigen::VectorXd solve_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                                    const std::string& child) {
  const Eigen::MatrixXd gram = design.transpose() * design;
  const Eigen::VectorXd moment = design.transpose() * target;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> spectrum(gram, Eigen::EigenvaluesOnly);
  const double smallest = spectrum.eigenvalues().minCoeff();
  const double largest = spectrum.eigenvalues().maxCoeff();
  if (!(smallest > 0.0) || largest / smallest > kMaxCondition) {
    throw Error(ErrorCode::kSingularDesign,
                "equation for '" + child + "' has collinear or constant regressors");
  }
  return gram.colPivHouseholderQr().solve(moment);
}

}  // namespace

std::optional<std::size_t> Individual::snapshot_at(std::int64_t time) const {
  for (std::size_t s = 0; s < snapshots.size(); ++s) {
    if (snapshots[s].time == time) return s;
  }
  return std::nullopt;
}

double StructuralEquation::mean(const ValueMap& values) const {
  double total = intercept;
  for (const auto& term : terms) total += term.weight * term.regressor(lookup(values, term.parent));
  return total;
}

std::vector<Term> expected_terms(const CausalGraph& graph, std::string_view child) {
  std::vector<Term> terms;
  for (const auto& parent : graph.parents(child)) {
    const VariableSpec& spec = graph.at(parent);
    if (!spec.categorical()) {
      terms.push_back({parent, std::nullopt, 0.0});
      continue;
    }
    for (int level = 1; level < static_cast<int>(spec.levels.size()); ++level) {
      terms.push_back({parent, level, 0.0});
    }
  }
  return terms;
}

std::string term_key(const CausalGraph& graph, const Term& term) {
  if (!term.level) return term.parent;
  return term.parent + "=" + graph.at(term.parent).levels.at(static_cast<std::size_t>(*term.level));
}

FittedScm::FittedScm(CausalGraph graph, std::map<std::string, StructuralEquation> equations,
                     std::map<std::string, FitStats> fit_stats)
    : graph_(std::move(graph)), equations_(std::move(equations)), fit_stats_(std::move(fit_stats)) {
  validate_graph(graph_);
  for (const auto* v : graph_.with_role(Role::kProtected)) protected_.push_back(v->name);
  if (auto outcomes = graph_.with_role(Role::kOutcome); !outcomes.empty()) {
    outcome_ = outcomes.front()->name;
  }
  for (const auto& name : graph_.topological_order()) {
    if (graph_.at(name).role == Role::kObservable) observables_.push_back(name);
  }

  for (const auto& name : observables_) {
    if (!equations_.contains(name)) {
      throw Error(ErrorCode::kInvalidArgument, "no structural equation for observable '" + name + "'");
    }
  }
  for (auto& [child, eq] : equations_) {
    const VariableSpec* spec = graph_.find(child);
    if (spec == nullptr || spec->role == Role::kProtected) {
      throw Error(ErrorCode::kInvalidArgument, "equation for non-modelled variable '" + child + "'");
    }
    if (spec->role == Role::kOutcome && spec->categorical()) {
      throw Error(ErrorCode::kInvalidArgument, "categorical outcome '" + child + "' has no linear equation");
    }
    if (eq.child.empty()) eq.child = child;
    if (eq.child != child) {
      throw Error(ErrorCode::kInvalidArgument, "equation keyed '" + child + "' names child '" + eq.child + "'");
    }
    if (!std::isfinite(eq.intercept) || !std::isfinite(eq.noise_std) || eq.noise_std < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "equation for '" + child + "' has invalid intercept or noise_std");
    }
    // Reorder the supplied terms into canonical order, requiring an exact match.
    std::vector<Term> canonical = expected_terms(graph_, child);
    if (canonical.size() != eq.terms.size()) {
      throw Error(ErrorCode::kInvalidArgument, "equation for '" + child + "' does not match its parents");
    }
    for (auto& slot : canonical) {
      auto match = std::find_if(eq.terms.begin(), eq.terms.end(), [&](const Term& t) {
        return t.parent == slot.parent && t.level == slot.level;
      });
      if (match == eq.terms.end() || !std::isfinite(match->weight)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "equation for '" + child + "' lacks weight '" + term_key(graph_, slot) + "'");
      }
      slot.weight = match->weight;
    }
    eq.terms = std::move(canonical);
  }
}

const StructuralEquation& FittedScm::equation(std::string_view child) const {
  auto it = equations_.find(std::string(child));
  if (it == equations_.end()) {
    throw Error(ErrorCode::kInvalidArgument, "no equation for '" + std::string(child) + "'");
  }
  return it->second;
}

const StructuralEquation* FittedScm::outcome_equation() const noexcept {
  if (!outcome_) return nullptr;
  auto it = equations_.find(*outcome_);
  return it == equations_.end() ? nullptr : &it->second;
}

void validate_individual(const CausalGraph& graph, const Individual& individual) {
  const std::string who = "individual '" + individual.id + "'";
  if (individual.snapshots.empty()) throw Error(ErrorCode::kMissingValue, who + " has no snapshots");
  for (const auto* spec : graph.with_role(Role::kProtected)) {
    auto it = individual.protected_values.find(spec->name);
    if (it == individual.protected_values.end()) {
      throw Error(ErrorCode::kMissingValue, who + ": " + spec->name);
    }
    if (!spec->admits(it->second)) throw Error(ErrorCode::kDomainViolation, who + ": " + spec->name);
  }
  const auto observables = graph.with_role(Role::kObservable);
  for (std::size_t s = 0; s < individual.snapshots.size(); ++s) {
    const Snapshot& snap = individual.snapshots[s];
    if (s > 0 && snap.time <= individual.snapshots[s - 1].time) {
      throw Error(ErrorCode::kDuplicateTimestamp, who + ": snapshot times must strictly increase");
    }
    if (snap.observables.size() != observables.size()) {
      throw Error(ErrorCode::kMissingValue, who + ": snapshot observable set differs from the graph");
    }
    for (const auto* spec : observables) {
      auto it = snap.observables.find(spec->name);
      if (it == snap.observables.end()) throw Error(ErrorCode::kMissingValue, who + ": " + spec->name);
      if (!spec->admits(it->second)) throw Error(ErrorCode::kDomainViolation, who + ": " + spec->name);
    }
  }
  if (individual.outcome) {
    if (auto outcomes = graph.with_role(Role::kOutcome); !outcomes.empty() &&
                                                         !outcomes.front()->admits(*individual.outcome)) {
      throw Error(ErrorCode::kDomainViolation, who + ": outcome " + outcomes.front()->name);
    }
  }
}

void validate_intervention(const FittedScm& scm, const Intervention& intervention) {
  for (const auto& [name, value] : intervention.assignments) {
    const VariableSpec* spec = scm.graph().find(name);
    if (spec == nullptr || spec->role != Role::kProtected) throw Error(ErrorCode::kUnknownProtected, name);
    if (!spec->admits(value)) {
      throw Error(ErrorCode::kDomainViolation, "intervention value out of domain for '" + name + "'");
    }
  }
}

FittedScm fit_scm(const CausalGraph& graph, std::span<const Individual> dataset) {
  validate_graph(graph);
  if (dataset.empty()) throw Error(ErrorCode::kInsufficientData, "empty dataset");
  for (const auto& individual : dataset) validate_individual(graph, individual);

  // Row views: merged protected + observable values per snapshot.
  std::vector<ValueMap> feature_rows;
  std::vector<ValueMap> label_rows;
  std::vector<double> labels;
  const VariableSpec* outcome = nullptr;
  if (auto outcomes = graph.with_role(Role::kOutcome); !outcomes.empty()) outcome = outcomes.front();
  bool fit_outcome = outcome != nullptr && !outcome->categorical();
  for (const auto& individual : dataset) {
    for (const auto& snap : individual.snapshots) {
      ValueMap row = individual.protected_values;
      row.insert(snap.observables.begin(), snap.observables.end());
      feature_rows.push_back(std::move(row));
    }
    if (!individual.outcome) {
      fit_outcome = false;
    } else if (fit_outcome) {
      ValueMap row = individual.protected_values;
      const auto& snap = individual.snapshots[individual.label_snapshot()];
      row.insert(snap.observables.begin(), snap.observables.end());
      label_rows.push_back(std::move(row));
      labels.push_back(*individual.outcome);
    }
  }

  auto fit_one = [&](const std::string& child, const std::vector<ValueMap>& rows,
                     const std::vector<double>* targets) {
    StructuralEquation eq;
    eq.child = child;
    eq.terms = expected_terms(graph, child);
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(eq.terms.size() + 1);
    if (n <= p) {
      throw Error(ErrorCode::kInsufficientData, "equation for '" + child + "' has " +
                                                    std::to_string(n) + " rows for " +
                                                    std::to_string(p) + " coefficients");
    }
    Eigen::MatrixXd design(n, p);
    Eigen::VectorXd target(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const ValueMap& row = rows[static_cast<std::size_t>(r)];
      design(r, 0) = 1.0;
      for (std::size_t t = 0; t < eq.terms.size(); ++t) {
        design(r, static_cast<Eigen::Index>(t + 1)) =
            eq.terms[t].regressor(lookup(row, eq.terms[t].parent));
      }
      target(r) = targets ? (*targets)[static_cast<std::size_t>(r)] : lookup(row, child);
    }
    const Eigen::VectorXd coef = solve_least_squares(design, target, child);
    eq.intercept = coef(0);
    for (std::size_t t = 0; t < eq.terms.size(); ++t) {
      eq.terms[t].weight = coef(static_cast<Eigen::Index>(t + 1));
    }
    const Eigen::VectorXd residual = target - design * coef;
    const double variance = residual.squaredNorm() / static_cast<double>(n - p);
    eq.noise_std = std::sqrt(variance);
    return std::pair{eq, FitStats{variance, static_cast<std::size_t>(n)}};
  };

  std::map<std::string, StructuralEquation> equations;
  std::map<std::string, FitStats> stats;
  for (const auto* spec : graph.with_role(Role::kObservable)) {
    auto [eq, st] = fit_one(spec->name, feature_rows, nullptr);
    equations.emplace(spec->name, std::move(eq));
    stats.emplace(spec->name, st);
  }
  if (fit_outcome) {
    auto [eq, st] = fit_one(outcome->name, label_rows, &labels);
    equations.emplace(outcome->name, std::move(eq));
    stats.emplace(outcome->name, st);
  }
  return FittedScm(graph, std::move(equations), std::move(stats));
}

namespace {

ValueMap factual_values(const FittedScm& scm, const Individual& individual, std::size_t snapshot_index) {
  if (snapshot_index >= individual.snapshots.size()) {
    throw Error(ErrorCode::kUnknownSnapshot, "individual '" + individual.id + "' has no snapshot " +
                                                 std::to_string(snapshot_index));
  }
  ValueMap values;
  for (const auto& name : scm.protected_names()) {
    auto it = individual.protected_values.find(name);
    if (it == individual.protected_values.end()) {
      throw Error(ErrorCode::kMissingValue, "individual '" + individual.id + "': " + name);
    }
    values.emplace(name, it->second);
  }
  const Snapshot& snap = individual.snapshots[snapshot_index];
  for (const auto& name : scm.observable_names()) {
    auto it = snap.observables.find(name);
    if (it == snap.observables.end()) {
      throw Error(ErrorCode::kMissingValue, "individual '" + individual.id + "': " + name);
    }
    values.emplace(name, it->second);
  }
  return values;
}

}  // namespace

LatentAssignment abduct(const FittedScm& scm, const Individual& individual, std::size_t snapshot_index) {
  const ValueMap values = factual_values(scm, individual, snapshot_index);
  LatentAssignment latent;
  for (const auto& name : scm.observable_names()) {
    const StructuralEquation& eq = scm.equation(name);
    latent.residuals.emplace(name, values.at(name) - eq.mean(values));
  }
  return latent;
}

Snapshot propagate(const FittedScm& scm, const ValueMap& protected_values,
                   const LatentAssignment& latent, std::int64_t time) {
  ValueMap values = protected_values;
  Snapshot out;
  out.time = time;
  for (const auto& name : scm.observable_names()) {
    const double value = scm.equation(name).mean(values) + lookup(latent.residuals, name);
    values[name] = value;
    out.observables.emplace(name, value);
  }
  return out;
}

namespace {

ValueMap apply_intervention(const FittedScm& scm, const Individual& individual,
                            const Intervention& intervention) {
  validate_intervention(scm, intervention);
  ValueMap protected_values;
  for (const auto& name : scm.protected_names()) {
    auto it = intervention.assignments.find(name);
    protected_values.emplace(name, it != intervention.assignments.end()
                                       ? it->second
                                       : lookup(individual.protected_values, name));
  }
  return protected_values;
}

}  // namespace

Snapshot counterfactual(const FittedScm& scm, const Individual& individual,
                        std::size_t snapshot_index, const Intervention& intervention) {
  World world = counterfactual_world(scm, individual, snapshot_index, intervention);
  return Snapshot{individual.snapshots[snapshot_index].time, std::move(world.observables)};
}

World factual_world(const FittedScm& scm, const Individual& individual, std::size_t snapshot_index) {
  World world;
  world.latent = abduct(scm, individual, snapshot_index);
  for (const auto& name : scm.protected_names()) {
    world.protected_values.emplace(name, individual.protected_values.at(name));
  }
  world.observables = individual.snapshots[snapshot_index].observables;
  return world;
}

World counterfactual_world(const FittedScm& scm, const Individual& individual,
                           std::size_t snapshot_index, const Intervention& intervention) {
  World world;
  world.latent = abduct(scm, individual, snapshot_index);
  world.protected_values = apply_intervention(scm, individual, intervention);

  // Variables none of whose parents moved keep their factual value bit for
  // bit; recomputing mean + residual would only reintroduce rounding.
  const ValueMap& factual = individual.snapshots[snapshot_index].observables;
  ValueMap values = world.protected_values;
  std::set<std::string, std::less<>> moved;
  for (const auto& [name, value] : world.protected_values) {
    if (value != individual.protected_values.at(name)) moved.insert(name);
  }
  for (const auto& name : scm.observable_names()) {
    const StructuralEquation& eq = scm.equation(name);
    const bool affected = std::any_of(eq.terms.begin(), eq.terms.end(),
                                      [&](const Term& t) { return moved.contains(t.parent); });
    double value = factual.at(name);
    if (affected) {
      value = eq.mean(values) + world.latent.residuals.at(name);
      if (value != factual.at(name)) moved.insert(name);
    }
    values[name] = value;
    world.observables.emplace(name, value);
  }
  return world;
}

}  // namespace contrafair

namespace contrafair {

std::vector<Intervention> enumerate_interventions(const CausalGraph& graph, const ProtectedGrid& grid) {
  std::vector<Intervention> out{Intervention{}};
  for (const auto* spec : graph.with_role(Role::kProtected)) {
    std::vector<double> values;
    if (auto it = grid.find(spec->name); it != grid.end()) {
      values = it->second;
      for (double v : values) {
        if (!spec->admits(v)) {
          throw Error(ErrorCode::kDomainViolation, "grid value out of domain for '" + spec->name + "'");
        }
      }
    } else if (spec->categorical()) {
      for (std::size_t level = 0; level < spec->levels.size(); ++level) {
        values.push_back(static_cast<double>(level));
      }
    } else {
      throw Error(ErrorCode::kContinuousProtectedUnenumerable, spec->name);
    }
    if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "empty grid for '" + spec->name + "'");

    std::vector<Intervention> next;
    next.reserve(out.size() * values.size());
    for (const auto& partial : out) {
      for (double v : values) {
        Intervention extended = partial;
        extended.assignments.emplace(spec->name, v);
        next.push_back(std::move(extended));
      }
    }
    out = std::move(next);
  }
  return out;
}

std::string describe(const CausalGraph& graph, const Intervention& intervention) {
  std::string text;
  // Declaration order rather than map order so the text reads like the graph.
  for (const auto* spec : graph.with_role(Role::kProtected)) {
    auto it = intervention.assignments.find(spec->name);
    if (it == intervention.assignments.end()) continue;
    if (!text.empty()) text += ',';
    text += spec->name + "=" + spec->format_value(it->second);
  }
  return text;
}

}  // namespace contrafair
