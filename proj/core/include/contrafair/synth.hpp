#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "contrafair/fairness.hpp"
#include "contrafair/predictor.hpp"
#include "contrafair/scm.hpp"

namespace contrafair {

struct GeneratorConfig {
  std::size_t n = 1;
  std::uint64_t seed = 0;
  // Probability vector over each protected variable's levels (or over the
  // matching entry of protected_support for continuous variables).
  std::map<std::string, std::vector<double>, std::less<>> protected_marginals;
  std::map<std::string, std::vector<double>, std::less<>> protected_support;
  std::size_t snapshots_per_individual = 1;
  // Additive shift per tick applied to an observable's noise term, so later
  // snapshots stay consistent with the model.
  ValueMap drift;
  std::string id_prefix = "i";

  void validate(const FittedScm& scm) const;
};

// Ancestral sampling from the additive-noise model. Each individual draws from
// its own stream seeded by (seed, index). When the model has an outcome
// equation, the outcome is sampled from the last snapshot.
std::vector<Individual> sample_population(const FittedScm& scm, const GeneratorConfig& config);

// Uniform marginals over every categorical protected variable.
GeneratorConfig uniform_config(const FittedScm& scm, std::size_t n, std::uint64_t seed);

// Small fixtures with documented coefficients.
namespace presets {

// A in {0,1};  X = 1 + 2A + e_X, sd 0.5;  Y = -1 + X - 1.8A + e_Y, sd 0.3.
// Decisions {deny, grant}, grant when Y >= 0.1.
FittedScm fix_a();
inline constexpr double kFixAThreshold = 0.1;
DecisionSpace fix_a_decisions();
GeneratorConfig fix_a_config(std::size_t n, std::uint64_t seed);

// Law-school-like model: race, sex -> GPA, LSAT; race, sex, GPA, LSAT -> FYA.
// Decisions {low, high}, high when FYA >= 0.
FittedScm law_school();
inline constexpr double kLawSchoolThreshold = 0.0;
DecisionSpace law_school_decisions();
GeneratorConfig law_school_config(std::size_t n, std::uint64_t seed);

// Employee placement: race, sex -> appraisal, experience -> suitability.
// Decisions {Satellite, London}, London when suitability >= 0.
FittedScm job_location();
inline constexpr double kJobLocationThreshold = 0.0;
DecisionSpace job_location_decisions();
// The two named employees P and Q, each with two snapshots (ticks 0 and 1),
// followed by the sampled staff.
std::vector<Individual> job_location_population(std::size_t staff, std::uint64_t seed);

}  // namespace presets

// Random linear SCM with 1-2 categorical protected roots, observables and one
// continuous outcome; at most `max_nodes` variables in total (>= 3).
FittedScm random_linear_scm(std::mt19937_64& rng, std::size_t max_nodes);

// ---------------------------------------------------------------------------
// Test oracles. They share no propagation code with the scm module: values are
// obtained by naive recursive substitution over a flat equation list.

struct OracleEquation {
  std::string child;
  double intercept = 0.0;
  std::vector<Term> terms;
};

// Plain copy of the feature equations of a fitted model.
std::vector<OracleEquation> oracle_equations(const FittedScm& scm);

LatentAssignment oracle_abduct(std::span<const OracleEquation> equations, const Individual& individual,
                               std::size_t snapshot_index);

Snapshot oracle_counterfactual(std::span<const OracleEquation> equations, const Individual& individual,
                               std::size_t snapshot_index, const Intervention& intervention);
Snapshot oracle_counterfactual(std::span<const OracleEquation> equations, const Individual& individual,
                               const Intervention& intervention);

enum class Criterion { kCounterfactualFairness, kDContrast, kIContrast, kTContrast, kContrastMargin };

std::string_view to_string(Criterion criterion) noexcept;

struct OracleParams {
  Criterion criterion = Criterion::kCounterfactualFairness;
  std::string d;
  std::string d_prime;
  std::int64_t t = 0;
  std::int64_t t_prime = 0;
  Tolerance tol;
  // Candidate values per protected variable.
  std::map<std::string, std::vector<double>, std::less<>> domain;
};

// Level indices of every categorical protected variable.
std::map<std::string, std::vector<double>, std::less<>> oracle_domain(const CausalGraph& graph);

// Brute-force verdict: enumerates every (decision, intervention) inequality of
// the criterion. Throws DomainTooLarge beyond 16 protected combinations.
bool oracle_check(std::span<const OracleEquation> equations, const Predictor& predictor,
                  std::span<const Individual> subjects, const OracleParams& params);

}  // namespace contrafair
