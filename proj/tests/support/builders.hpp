#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "contrafair/error.hpp"
#include "contrafair/graph.hpp"
#include "contrafair/individual.hpp"
#include "contrafair/scm.hpp"

namespace contrafair::testing {

inline Individual person(std::string id, ValueMap protected_values, ValueMap observables,
                         std::optional<double> outcome = std::nullopt, std::int64_t time = 0) {
  Individual p;
  p.id = std::move(id);
  p.protected_values = std::move(protected_values);
  p.snapshots.push_back({time, std::move(observables)});
  p.outcome = outcome;
  return p;
}

// Equation with weights given by term key ("X", "R=level").
inline StructuralEquation make_equation(const CausalGraph& graph, const std::string& child, double intercept,
                                        const std::vector<std::pair<std::string, double>>& weights,
                                        double noise_std = 1.0) {
  StructuralEquation eq;
  eq.child = child;
  eq.intercept = intercept;
  eq.noise_std = noise_std;
  eq.terms = expected_terms(graph, child);
  for (auto& term : eq.terms) {
    for (const auto& [key, w] : weights) {
      if (term_key(graph, term) == key) term.weight = w;
    }
  }
  return eq;
}

// A in {0,1}, X1 = A + e1, X2 = 2 X1 + e2, outcome Y <- X2.
inline FittedScm chain_scm() {
  CausalGraph g({{"A", Role::kProtected, {"0", "1"}},
                 {"X1", Role::kObservable, {}},
                 {"X2", Role::kObservable, {}},
                 {"Y", Role::kOutcome, {"no", "yes"}}},
                {{"A", "X1"}, {"X1", "X2"}, {"X2", "Y"}});
  std::map<std::string, StructuralEquation> eqs;
  eqs.emplace("X1", make_equation(g, "X1", 0.0, {{"A=1", 1.0}}));
  eqs.emplace("X2", make_equation(g, "X2", 0.0, {{"X1", 2.0}}));
  return FittedScm(g, std::move(eqs));
}

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  throw std::logic_error("expected a contrafair::Error");
}

}  // namespace contrafair::testing
