#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "contrafair/predictor.hpp"
#include "contrafair/scm.hpp"

namespace contrafair {

// Equality clauses pass when the observed gap is within eps_fair; ordering
// clauses pass when the left side exceeds the right by more than delta_order
// (a tie never passes).
struct Tolerance {
  double eps_fair = 1e-6;
  double eps_population = 0.02;  // demographic parity / equality of opportunity
  double delta_order = 0.0;
  double lambda_margin = 0.05;
  bool strict_margin = false;  // make the d' margin clause pass-blocking
  ProtectedGrid grid;          // values for continuous protected variables

  void validate() const;
};

// Clause ids: "eq1".."eq14" for the individual criteria, and
// "demographic_parity", "equality_of_opportunity", "individual_fairness".
//
// For equality clauses lhs is the factual score, rhs the counterfactual score
// of the worst (decision, intervention) pair and margin their absolute gap.
// For ordering clauses margin = lhs - rhs. For the margin criterion lhs is the
// worst score difference between the two individuals, rhs the required
// lambda and margin = lhs - rhs.
struct Clause {
  std::string equation;
  bool passed = false;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  std::string intervention;
  std::string decision;
  std::string subject;
  bool advisory = false;  // recorded but excluded from Verdict::passed
};

struct Verdict {
  std::string criterion;
  std::string predictor;  // name given by the audit, empty otherwise
  bool passed = false;
  std::vector<Clause> clauses;
  std::vector<std::string> individuals;
  std::vector<std::string> decisions;
  std::vector<std::string> interventions;

  // passed = conjunction of every non-advisory clause
  void settle();
};

// Position of a clause id in report order: equations by number, then the
// population criteria.
int clause_rank(const std::string& equation);

Verdict check_counterfactual_fairness(const Predictor& predictor, const FittedScm& scm,
                                      const Individual& individual, const Tolerance& tol,
                                      std::size_t snapshot_index);
Verdict check_counterfactual_fairness(const Predictor& predictor, const FittedScm& scm,
                                      const Individual& individual, const Tolerance& tol = {});

// Counterfactual fairness restricted to `decisions` (every decision when empty).
Verdict check_counterfactual_fairness_over(const Predictor& predictor, const FittedScm& scm,
                                           const Individual& individual, const Tolerance& tol,
                                           std::size_t snapshot_index,
                                           std::span<const std::string> decisions);

// `d` is the decision actually taken.
Verdict check_d_contrast(const Predictor& predictor, const FittedScm& scm, const Individual& individual,
                         const std::string& d, const std::string& d_prime, const Tolerance& tol = {});

Verdict check_i_contrast(const Predictor& predictor, const FittedScm& scm, const Individual& individual_i,
                         const Individual& individual_j, const std::string& d, const std::string& d_prime,
                         const Tolerance& tol = {});

// `t` and `t_prime` are snapshot ticks.
Verdict check_t_contrast(const Predictor& predictor, const FittedScm& scm, const Individual& individual,
                         std::int64_t t, std::int64_t t_prime, const std::string& d,
                         const std::string& d_prime, const Tolerance& tol = {});

Verdict check_contrast_margin(const Predictor& predictor, const FittedScm& scm,
                              const Individual& individual_i, const Individual& individual_j,
                              const std::string& d, const std::string& d_prime, const Tolerance& tol = {});

// One scored row for the population criteria.
struct GroupedScore {
  std::string id;
  int group = 0;  // 0 or 1
  ScoreVector scores;
};

// Gap of per-group mean scores, maximized over decisions; fails beyond
// tol.eps_population. Throws EmptyGroup when a group has no rows.
Verdict demographic_parity(std::span<const GroupedScore> rows, const Tolerance& tol = {});

Verdict check_demographic_parity(const Predictor& predictor, const FittedScm& scm,
                                 std::span<const Individual> dataset, const std::string& group_attr,
                                 const Tolerance& tol = {});

// Demographic parity restricted to rows whose observed outcome is the
// favorable decision, compared on that decision's score.
Verdict check_equality_of_opportunity(const Predictor& predictor, const FittedScm& scm,
                                      std::span<const Individual> dataset, const std::string& group_attr,
                                      const std::string& favorable_outcome, const Tolerance& tol = {},
                                      std::optional<double> outcome_threshold = std::nullopt);

using IndividualMetric = std::function<double(const Individual&, const Individual&)>;

// Euclidean distance between label-snapshot observables.
double euclidean_observable_distance(const Individual& a, const Individual& b);

Verdict check_individual_fairness(const Predictor& predictor, const FittedScm& scm,
                                  std::span<const Individual> dataset, const IndividualMetric& metric,
                                  double pair_threshold, double score_threshold);

}  // namespace contrafair
