#include "contrafair/fairness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "contrafair/error.hpp"

namespace contrafair {

void Tolerance::validate() const {
  for (double v : {eps_fair, eps_population, delta_order, lambda_margin}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument, "tolerances must be finite and nonnegative");
    }
  }
}

int clause_rank(const std::string& equation) {
  if (equation.size() > 2 && equation.rfind("eq", 0) == 0 &&
      std::isdigit(static_cast<unsigned char>(equation[2]))) {
    return std::stoi(equation.substr(2));
  }
  if (equation == "demographic_parity") return 101;
  if (equation == "equality_of_opportunity") return 102;
  if (equation == "individual_fairness") return 103;
  return 1000;
}

void Verdict::settle() {
  std::stable_sort(clauses.begin(), clauses.end(), [](const Clause& a, const Clause& b) {
    const int ra = clause_rank(a.equation);
    const int rb = clause_rank(b.equation);
    if (ra != rb) return ra < rb;
    return a.subject < b.subject;
  });
  passed = std::all_of(clauses.begin(), clauses.end(),
                       [](const Clause& c) { return c.advisory || c.passed; });
}

namespace {

std::string at_tick(const Individual& individual, std::size_t snapshot_index) {
  if (individual.snapshots.size() <= 1) return individual.id;
  return individual.id + "@" + std::to_string(individual.snapshots[snapshot_index].time);
}

void require_decisions(const Predictor& predictor, const std::string& d, const std::string& d_prime) {
  if (d == d_prime) throw Error(ErrorCode::kSameDecision, d);
  predictor.decisions().index_of(d);
  predictor.decisions().index_of(d_prime);
}

Intervention full_assignment(const FittedScm& scm, const Individual& individual) {
  Intervention out;
  for (const auto& name : scm.protected_names()) {
    auto it = individual.protected_values.find(name);
    if (it == individual.protected_values.end()) {
      throw Error(ErrorCode::kMissingValue, "individual '" + individual.id + "': " + name);
    }
    out.assignments.emplace(name, it->second);
  }
  return out;
}

struct Probe {
  std::vector<Intervention> interventions;
  std::vector<std::string> descriptions;
};

Probe protected_domain(const FittedScm& scm, const Tolerance& tol) {
  Probe probe;
  probe.interventions = enumerate_interventions(scm.graph(), tol.grid);
  for (const auto& iv : probe.interventions) probe.descriptions.push_back(describe(scm.graph(), iv));
  return probe;
}

// Largest |counterfactual - factual| score over the given decisions and every
// intervention, folded into `clause` when it beats what the clause holds.
void fold_invariance(const Predictor& predictor, const FittedScm& scm, const Individual& individual,
                     std::size_t snapshot_index, const Probe& probe, std::span<const std::size_t> decisions,
                     Clause& clause, bool& seen) {
  const ScoreVector factual = predict(predictor, scm, individual, snapshot_index);
  for (std::size_t k = 0; k < probe.interventions.size(); ++k) {
    const ScoreVector moved =
        counterfactual_score(predictor, scm, individual, snapshot_index, probe.interventions[k]);
    for (std::size_t d : decisions) {
      const double gap = std::abs(moved[d] - factual[d]);
      if (!seen || gap > clause.margin) {
        seen = true;
        clause.lhs = factual[d];
        clause.rhs = moved[d];
        clause.margin = gap;
        clause.intervention = probe.descriptions[k];
        clause.decision = factual.labels[d];
        clause.subject = at_tick(individual, snapshot_index);
      }
    }
  }
}

Clause invariance_clause(std::string equation, const Predictor& predictor, const FittedScm& scm,
                         const Individual& individual, std::span<const std::size_t> snapshots,
                         const Probe& probe, std::span<const std::size_t> decisions, const Tolerance& tol) {
  Clause clause;
  clause.equation = std::move(equation);
  bool seen = false;
  for (std::size_t s : snapshots) {
    fold_invariance(predictor, scm, individual, s, probe, decisions, clause, seen);
  }
  clause.passed = clause.margin <= tol.eps_fair;
  return clause;
}

std::vector<std::size_t> all_decisions(const Predictor& predictor) {
  std::vector<std::size_t> out(predictor.decisions().size());
  for (std::size_t d = 0; d < out.size(); ++d) out[d] = d;
  return out;
}

Clause ordering_clause(std::string equation, const ScoreVector& scores, const std::string& higher,
                       const std::string& lower, const Tolerance& tol, std::string subject,
                       std::string intervention = {}) {
  Clause clause;
  clause.equation = std::move(equation);
  clause.lhs = scores.at(higher);
  clause.rhs = scores.at(lower);
  clause.margin = clause.lhs - clause.rhs;
  clause.passed = clause.margin > tol.delta_order;
  clause.decision = higher;
  clause.subject = std::move(subject);
  clause.intervention = std::move(intervention);
  return clause;
}

std::size_t require_snapshot(const Individual& individual, std::size_t index) {
  if (index >= individual.snapshots.size()) {
    throw Error(ErrorCode::kUnknownSnapshot, "individual '" + individual.id + "' has no snapshot " +
                                                 std::to_string(index));
  }
  return index;
}

}  // namespace

Verdict check_counterfactual_fairness_over(const Predictor& predictor, const FittedScm& scm,
                                           const Individual& individual, const Tolerance& tol,
                                           std::size_t snapshot_index, std::span<const std::string> decisions) {
  tol.validate();
  require_snapshot(individual, snapshot_index);
  std::vector<std::size_t> indices;
  for (const auto& label : decisions) indices.push_back(predictor.decisions().index_of(label));
  if (indices.empty()) indices = all_decisions(predictor);

  const Probe probe = protected_domain(scm, tol);
  const std::size_t snaps[] = {snapshot_index};
  Verdict v;
  v.criterion = "counterfactual_fairness";
  v.individuals = {individual.id};
  for (std::size_t d : indices) v.decisions.push_back(predictor.decisions().labels()[d]);
  v.interventions = probe.descriptions;
  v.clauses.push_back(invariance_clause("eq1", predictor, scm, individual, snaps, probe, indices, tol));
  v.settle();
  return v;
}

Verdict check_counterfactual_fairness(const Predictor& predictor, const FittedScm& scm,
                                      const Individual& individual, const Tolerance& tol,
                                      std::size_t snapshot_index) {
  return check_counterfactual_fairness_over(predictor, scm, individual, tol, snapshot_index, {});
}

Verdict check_counterfactual_fairness(const Predictor& predictor, const FittedScm& scm,
                                      const Individual& individual, const Tolerance& tol) {
  return check_counterfactual_fairness(predictor, scm, individual, tol, individual.label_snapshot());
}

Verdict check_d_contrast(const Predictor& predictor, const FittedScm& scm, const Individual& individual,
                         const std::string& d, const std::string& d_prime, const Tolerance& tol) {
  tol.validate();
  require_decisions(predictor, d, d_prime);
  const std::size_t snap = individual.label_snapshot();
  const std::string pair[] = {d, d_prime};
  Verdict v = check_counterfactual_fairness_over(predictor, scm, individual, tol, snap, pair);
  v.criterion = "d_contrast";
  v.clauses.front().equation = "eq2";
  v.clauses.push_back(ordering_clause("eq3", predict(predictor, scm, individual, snap), d, d_prime, tol,
                                      at_tick(individual, snap)));
  v.settle();
  return v;
}

Verdict check_i_contrast(const Predictor& predictor, const FittedScm& scm, const Individual& individual_i,
                         const Individual& individual_j, const std::string& d, const std::string& d_prime,
                         const Tolerance& tol) {
  tol.validate();
  if (individual_i.id == individual_j.id) throw Error(ErrorCode::kSameIndividual, individual_i.id);
  require_decisions(predictor, d, d_prime);
  const std::size_t si = individual_i.label_snapshot();
  const std::size_t sj = individual_j.label_snapshot();
  const Probe probe = protected_domain(scm, tol);
  const std::vector<std::size_t> decisions = all_decisions(predictor);
  const Intervention a_i = full_assignment(scm, individual_i);
  const Intervention a_j = full_assignment(scm, individual_j);

  Verdict v;
  v.criterion = "i_contrast";
  v.individuals = {individual_i.id, individual_j.id};
  v.decisions = {d, d_prime};
  v.interventions = probe.descriptions;
  const std::size_t snaps_i[] = {si};
  const std::size_t snaps_j[] = {sj};
  v.clauses.push_back(invariance_clause("eq4", predictor, scm, individual_i, snaps_i, probe, decisions, tol));
  v.clauses.push_back(invariance_clause("eq5", predictor, scm, individual_j, snaps_j, probe, decisions, tol));
  v.clauses.push_back(ordering_clause("eq6", predict(predictor, scm, individual_i, si), d, d_prime, tol,
                                      individual_i.id));
  v.clauses.push_back(ordering_clause("eq7", predict(predictor, scm, individual_j, sj), d_prime, d, tol,
                                      individual_j.id));
  v.clauses.push_back(ordering_clause("eq8", counterfactual_score(predictor, scm, individual_i, si, a_j), d,
                                      d_prime, tol, individual_i.id, describe(scm.graph(), a_j)));
  v.clauses.push_back(ordering_clause("eq9", counterfactual_score(predictor, scm, individual_j, sj, a_i),
                                      d_prime, d, tol, individual_j.id, describe(scm.graph(), a_i)));
  v.settle();
  return v;
}

Verdict check_t_contrast(const Predictor& predictor, const FittedScm& scm, const Individual& individual,
                         std::int64_t t, std::int64_t t_prime, const std::string& d,
                         const std::string& d_prime, const Tolerance& tol) {
  tol.validate();
  require_decisions(predictor, d, d_prime);
  const auto at_t = individual.snapshot_at(t);
  const auto at_t_prime = individual.snapshot_at(t_prime);
  if (!at_t || !at_t_prime) {
    throw Error(ErrorCode::kUnknownSnapshot, "individual '" + individual.id + "' has no snapshot at tick " +
                                                 std::to_string(at_t ? t_prime : t));
  }
  const Probe probe = protected_domain(scm, tol);
  std::vector<std::size_t> snaps(individual.snapshots.size());
  for (std::size_t s = 0; s < snaps.size(); ++s) snaps[s] = s;

  Verdict v;
  v.criterion = "t_contrast";
  v.individuals = {individual.id};
  v.decisions = {d, d_prime};
  v.interventions = probe.descriptions;
  v.clauses.push_back(
      invariance_clause("eq10", predictor, scm, individual, snaps, probe, all_decisions(predictor), tol));
  v.clauses.push_back(ordering_clause("eq11", predict(predictor, scm, individual, *at_t), d, d_prime, tol,
                                      at_tick(individual, *at_t)));
  v.clauses.push_back(ordering_clause("eq12", predict(predictor, scm, individual, *at_t_prime), d_prime, d,
                                      tol, at_tick(individual, *at_t_prime)));
  v.settle();
  return v;
}

Verdict check_contrast_margin(const Predictor& predictor, const FittedScm& scm,
                              const Individual& individual_i, const Individual& individual_j,
                              const std::string& d, const std::string& d_prime, const Tolerance& tol) {
  tol.validate();
  if (individual_i.id == individual_j.id) throw Error(ErrorCode::kSameIndividual, individual_i.id);
  require_decisions(predictor, d, d_prime);
  const std::size_t si = individual_i.label_snapshot();
  const std::size_t sj = individual_j.label_snapshot();
  std::vector<Intervention> shared{full_assignment(scm, individual_i)};
  if (Intervention a_j = full_assignment(scm, individual_j); !(a_j == shared.front())) {
    shared.push_back(std::move(a_j));
  }

  Verdict v;
  v.criterion = "contrast_margin";
  v.individuals = {individual_i.id, individual_j.id};
  v.decisions = {d, d_prime};
  for (const auto& iv : shared) v.interventions.push_back(describe(scm.graph(), iv));

  // eq13: i ahead of j on d; eq14: j ahead of i on d'. Each keeps its worst case.
  auto margin_clause = [&](std::string equation, const std::string& decision, bool i_leads) {
    Clause clause;
    clause.equation = std::move(equation);
    clause.rhs = tol.lambda_margin;
    clause.decision = decision;
    clause.subject = i_leads ? individual_i.id + "|" + individual_j.id : individual_j.id + "|" + individual_i.id;
    bool seen = false;
    for (const auto& iv : shared) {
      const double score_i = counterfactual_score(predictor, scm, individual_i, si, iv).at(decision);
      const double score_j = counterfactual_score(predictor, scm, individual_j, sj, iv).at(decision);
      const double lead = i_leads ? score_i - score_j : score_j - score_i;
      if (!seen || lead < clause.lhs) {
        seen = true;
        clause.lhs = lead;
        clause.intervention = describe(scm.graph(), iv);
      }
    }
    clause.margin = clause.lhs - clause.rhs;
    clause.passed = clause.margin > 0.0;
    return clause;
  };
  v.clauses.push_back(margin_clause("eq13", d, true));
  Clause reverse = margin_clause("eq14", d_prime, false);
  reverse.advisory = !tol.strict_margin;
  v.clauses.push_back(std::move(reverse));
  v.settle();
  return v;
}

Verdict demographic_parity(std::span<const GroupedScore> rows, const Tolerance& tol) {
  tol.validate();
  if (rows.empty()) throw Error(ErrorCode::kEmptyGroup, "no rows");
  const std::vector<std::string>& labels = rows.front().scores.labels;
  std::vector<double> sums[2] = {std::vector<double>(labels.size(), 0.0),
                                 std::vector<double>(labels.size(), 0.0)};
  std::size_t counts[2] = {0, 0};
  for (const auto& row : rows) {
    if (row.group != 0 && row.group != 1) throw Error(ErrorCode::kInvalidArgument, "group must be 0 or 1");
    if (row.scores.labels != labels) throw Error(ErrorCode::kSchemaMismatch, "mixed decision spaces");
    ++counts[row.group];
    for (std::size_t d = 0; d < labels.size(); ++d) sums[row.group][d] += row.scores[d];
  }
  for (int g = 0; g < 2; ++g) {
    if (counts[g] == 0) throw Error(ErrorCode::kEmptyGroup, "group " + std::to_string(g) + " is empty");
  }

  Verdict v;
  v.criterion = "demographic_parity";
  v.decisions = labels;
  for (const auto& row : rows) v.individuals.push_back(row.id);
  Clause clause;
  clause.equation = "demographic_parity";
  clause.subject = "group 0 vs group 1";
  for (std::size_t d = 0; d < labels.size(); ++d) {
    const double mean0 = sums[0][d] / static_cast<double>(counts[0]);
    const double mean1 = sums[1][d] / static_cast<double>(counts[1]);
    const double gap = std::abs(mean0 - mean1);
    if (d == 0 || gap > clause.margin) {
      clause.lhs = mean0;
      clause.rhs = mean1;
      clause.margin = gap;
      clause.decision = labels[d];
    }
  }
  clause.passed = clause.margin <= tol.eps_population;
  v.clauses.push_back(std::move(clause));
  v.settle();
  return v;
}

namespace {

int binary_group(const FittedScm& scm, const Individual& individual, const std::string& group_attr) {
  const VariableSpec& spec = scm.graph().at(group_attr);
  if (spec.role != Role::kProtected) {
    throw Error(ErrorCode::kInvalidArgument, "'" + group_attr + "' is not a protected variable");
  }
  if (spec.categorical() && spec.levels.size() != 2) {
    throw Error(ErrorCode::kInvalidArgument, "'" + group_attr + "' is not binary");
  }
  auto it = individual.protected_values.find(group_attr);
  if (it == individual.protected_values.end()) {
    throw Error(ErrorCode::kMissingValue, "individual '" + individual.id + "': " + group_attr);
  }
  if (it->second != 0.0 && it->second != 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "'" + group_attr + "' takes values other than 0 and 1");
  }
  return static_cast<int>(it->second);
}

}  // namespace

Verdict check_demographic_parity(const Predictor& predictor, const FittedScm& scm,
                                 std::span<const Individual> dataset, const std::string& group_attr,
                                 const Tolerance& tol) {
  std::vector<GroupedScore> rows;
  rows.reserve(dataset.size());
  for (const auto& individual : dataset) {
    rows.push_back({individual.id, binary_group(scm, individual, group_attr),
                    predict(predictor, scm, individual, individual.label_snapshot())});
  }
  Verdict v = demographic_parity(rows, tol);
  v.interventions = {group_attr};
  return v;
}

Verdict check_equality_of_opportunity(const Predictor& predictor, const FittedScm& scm,
                                      std::span<const Individual> dataset, const std::string& group_attr,
                                      const std::string& favorable_outcome, const Tolerance& tol,
                                      std::optional<double> outcome_threshold) {
  const std::size_t favorable = predictor.decisions().index_of(favorable_outcome);
  std::vector<GroupedScore> rows;
  bool seen[2] = {false, false};
  for (const auto& individual : dataset) {
    if (!individual.outcome) throw Error(ErrorCode::kMissingOutcome, "individual '" + individual.id + "'");
    const std::size_t observed =
        decision_for_outcome(scm.graph(), predictor.decisions(), outcome_threshold, *individual.outcome);
    if (observed != favorable) continue;
    const int group = binary_group(scm, individual, group_attr);
    seen[group] = true;
    ScoreVector full = predict(predictor, scm, individual, individual.label_snapshot());
    rows.push_back({individual.id, group, ScoreVector{{favorable_outcome}, {full[favorable]}}});
  }
  for (int g = 0; g < 2; ++g) {
    if (!seen[g]) {
      throw Error(ErrorCode::kEmptyConditionedGroup,
                  "group " + std::to_string(g) + " has no row with outcome '" + favorable_outcome + "'");
    }
  }
  Verdict v = demographic_parity(rows, tol);
  v.criterion = "equality_of_opportunity";
  v.clauses.front().equation = "equality_of_opportunity";
  v.decisions = {favorable_outcome};
  v.interventions = {group_attr};
  return v;
}

double euclidean_observable_distance(const Individual& a, const Individual& b) {
  const ValueMap& xa = a.snapshots.at(a.label_snapshot()).observables;
  const ValueMap& xb = b.snapshots.at(b.label_snapshot()).observables;
  if (xa.size() != xb.size()) throw Error(ErrorCode::kSchemaMismatch, "different observable sets");
  double total = 0.0;
  for (const auto& [name, value] : xa) {
    auto it = xb.find(name);
    if (it == xb.end()) throw Error(ErrorCode::kSchemaMismatch, "different observable sets");
    total += (value - it->second) * (value - it->second);
  }
  return std::sqrt(total);
}

Verdict check_individual_fairness(const Predictor& predictor, const FittedScm& scm,
                                  std::span<const Individual> dataset, const IndividualMetric& metric,
                                  double pair_threshold, double score_threshold) {
  if (!metric) throw Error(ErrorCode::kInvalidArgument, "individual fairness needs a metric");
  if (!(pair_threshold >= 0.0) || !(score_threshold >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "thresholds must be nonnegative");
  }
  std::vector<ScoreVector> scores;
  scores.reserve(dataset.size());
  for (const auto& individual : dataset) {
    scores.push_back(predict(predictor, scm, individual, individual.label_snapshot()));
  }

  Verdict v;
  v.criterion = "individual_fairness";
  v.decisions = predictor.decisions().labels();
  Clause clause;
  clause.equation = "individual_fairness";
  clause.rhs = score_threshold;
  bool seen = false;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (std::size_t j = i + 1; j < dataset.size(); ++j) {
      if (!(metric(dataset[i], dataset[j]) < pair_threshold)) continue;
      for (std::size_t d = 0; d < scores[i].size(); ++d) {
        const double gap = std::abs(scores[i][d] - scores[j][d]);
        if (!seen || gap > clause.lhs) {
          seen = true;
          clause.lhs = gap;
          clause.decision = scores[i].labels[d];
          clause.subject = dataset[i].id + "|" + dataset[j].id;
        }
      }
    }
  }
  clause.margin = clause.lhs - clause.rhs;
  clause.passed = clause.lhs <= score_threshold;
  if (seen) {
    const auto bar = clause.subject.find('|');
    v.individuals = {clause.subject.substr(0, bar), clause.subject.substr(bar + 1)};
  }
  v.clauses.push_back(std::move(clause));
  v.settle();
  return v;
}

}  // namespace contrafair
