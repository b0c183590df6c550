#include "contrafair/synth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "contrafair/error.hpp"

namespace contrafair {
namespace {

std::mt19937_64 individual_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

std::size_t draw_index(std::mt19937_64& rng, const std::vector<double>& probabilities) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double cumulative = 0.0;
  for (std::size_t k = 0; k < probabilities.size(); ++k) {
    cumulative += probabilities[k];
    if (u < cumulative) return k;
  }
  // u landed in the rounding slack above the last cumulative sum
  for (std::size_t k = probabilities.size(); k-- > 0;) {
    if (probabilities[k] > 0.0) return k;
  }
  return 0;
}

StructuralEquation equation(const CausalGraph& graph, const std::string& child, double intercept,
                            std::map<std::string, double> weights, double noise_std) {
  StructuralEquation eq;
  eq.child = child;
  eq.intercept = intercept;
  eq.noise_std = noise_std;
  eq.terms = expected_terms(graph, child);
  for (auto& term : eq.terms) term.weight = weights.at(term_key(graph, term));
  return eq;
}

}  // namespace

void GeneratorConfig::validate(const FittedScm& scm) const {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "population size must be >= 1");
  if (snapshots_per_individual < 1) throw Error(ErrorCode::kInvalidArgument, "need >= 1 snapshot");
  for (const auto* spec : scm.graph().with_role(Role::kProtected)) {
    auto it = protected_marginals.find(spec->name);
    if (it == protected_marginals.end()) throw Error(ErrorCode::kInvalidMarginal, "no marginal for " + spec->name);
    const std::vector<double>& p = it->second;
    std::size_t expected = spec->levels.size();
    if (!spec->categorical()) {
      auto support = protected_support.find(spec->name);
      if (support == protected_support.end()) {
        throw Error(ErrorCode::kInvalidMarginal, "continuous " + spec->name + " needs a support");
      }
      expected = support->second.size();
    }
    if (p.size() != expected || p.empty()) {
      throw Error(ErrorCode::kInvalidMarginal, spec->name + ": probability vector has the wrong length");
    }
    if (std::any_of(p.begin(), p.end(), [](double v) { return !(v >= 0.0); })) {
      throw Error(ErrorCode::kInvalidMarginal, spec->name + ": negative probability");
    }
    if (std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) > 1e-9) {
      throw Error(ErrorCode::kInvalidMarginal, spec->name + ": probabilities do not sum to 1");
    }
  }
  for (const auto& [name, shift] : drift) {
    const VariableSpec* spec = scm.graph().find(name);
    if (spec == nullptr || spec->role != Role::kObservable || !std::isfinite(shift)) {
      throw Error(ErrorCode::kInvalidArgument, "drift applies to observables only: " + name);
    }
  }
}

std::vector<Individual> sample_population(const FittedScm& scm, const GeneratorConfig& config) {
  config.validate(scm);
  const StructuralEquation* outcome_eq = scm.outcome_equation();
  std::vector<Individual> out;
  out.reserve(config.n);
  const std::size_t width = std::to_string(config.n - 1).size();
  for (std::size_t index = 0; index < config.n; ++index) {
    std::mt19937_64 rng = individual_stream(config.seed, index);
    std::normal_distribution<double> standard(0.0, 1.0);

    Individual person;
    std::string number = std::to_string(index);
    person.id = config.id_prefix + std::string(width - number.size(), '0') + number;
    for (const auto* spec : scm.graph().with_role(Role::kProtected)) {
      const std::size_t k = draw_index(rng, config.protected_marginals.find(spec->name)->second);
      person.protected_values.emplace(
          spec->name, spec->categorical() ? static_cast<double>(k)
                                          : config.protected_support.find(spec->name)->second[k]);
    }
    LatentAssignment latent;
    for (const auto& name : scm.observable_names()) {
      latent.residuals.emplace(name, scm.equation(name).noise_std * standard(rng));
    }
    for (std::size_t s = 0; s < config.snapshots_per_individual; ++s) {
      LatentAssignment shifted = latent;
      for (const auto& [name, step] : config.drift) shifted.residuals[name] += step * static_cast<double>(s);
      person.snapshots.push_back(
          propagate(scm, person.protected_values, shifted, static_cast<std::int64_t>(s)));
    }
    if (outcome_eq != nullptr) {
      ValueMap values = person.protected_values;
      const auto& last = person.snapshots.back().observables;
      values.insert(last.begin(), last.end());
      person.outcome = outcome_eq->mean(values) + outcome_eq->noise_std * standard(rng);
    }
    out.push_back(std::move(person));
  }
  return out;
}

GeneratorConfig uniform_config(const FittedScm& scm, std::size_t n, std::uint64_t seed) {
  GeneratorConfig config;
  config.n = n;
  config.seed = seed;
  for (const auto* spec : scm.graph().with_role(Role::kProtected)) {
    if (!spec->categorical()) {
      throw Error(ErrorCode::kInvalidMarginal, "continuous " + spec->name + " has no uniform marginal");
    }
    const std::size_t k = spec->levels.size();
    config.protected_marginals.emplace(spec->name, std::vector<double>(k, 1.0 / static_cast<double>(k)));
  }
  return config;
}

namespace presets {

FittedScm fix_a() {
  CausalGraph graph({{"A", Role::kProtected, {"0", "1"}}, {"X", Role::kObservable, {}}, {"Y", Role::kOutcome, {}}},
                    {{"A", "X"}, {"A", "Y"}, {"X", "Y"}});
  std::map<std::string, StructuralEquation> eqs;
  eqs.emplace("X", equation(graph, "X", 1.0, {{"A=1", 2.0}}, 0.5));
  eqs.emplace("Y", equation(graph, "Y", -1.0, {{"A=1", -1.8}, {"X", 1.0}}, 0.3));
  return FittedScm(std::move(graph), std::move(eqs));
}

DecisionSpace fix_a_decisions() { return DecisionSpace({"deny", "grant"}); }

GeneratorConfig fix_a_config(std::size_t n, std::uint64_t seed) {
  GeneratorConfig config;
  config.n = n;
  config.seed = seed;
  config.protected_marginals = {{"A", {0.5, 0.5}}};
  return config;
}

FittedScm law_school() {
  CausalGraph graph({{"race", Role::kProtected, {"white", "nonwhite"}},
                     {"sex", Role::kProtected, {"female", "male"}},
                     {"GPA", Role::kObservable, {}},
                     {"LSAT", Role::kObservable, {}},
                     {"FYA", Role::kOutcome, {}}},
                    {{"race", "GPA"}, {"sex", "GPA"}, {"race", "LSAT"}, {"sex", "LSAT"},
                     {"race", "FYA"}, {"sex", "FYA"}, {"GPA", "FYA"}, {"LSAT", "FYA"}});
  std::map<std::string, StructuralEquation> eqs;
  eqs.emplace("GPA", equation(graph, "GPA", 3.2, {{"race=nonwhite", -0.3}, {"sex=male", 0.1}}, 0.3));
  eqs.emplace("LSAT", equation(graph, "LSAT", 36.0, {{"race=nonwhite", -4.0}, {"sex=male", 0.5}}, 4.0));
  eqs.emplace("FYA", equation(graph, "FYA", -3.76,
                              {{"race=nonwhite", -0.2}, {"sex=male", 0.1}, {"GPA", 0.5}, {"LSAT", 0.06}}, 0.5));
  return FittedScm(std::move(graph), std::move(eqs));
}

DecisionSpace law_school_decisions() { return DecisionSpace({"low", "high"}); }

GeneratorConfig law_school_config(std::size_t n, std::uint64_t seed) {
  GeneratorConfig config;
  config.n = n;
  config.seed = seed;
  config.protected_marginals = {{"race", {0.7, 0.3}}, {"sex", {0.45, 0.55}}};
  return config;
}

FittedScm job_location() {
  CausalGraph graph({{"race", Role::kProtected, {"group_a", "group_b"}},
                     {"sex", Role::kProtected, {"female", "male"}},
                     {"appraisal", Role::kObservable, {}},
                     {"experience", Role::kObservable, {}},
                     {"suitability", Role::kOutcome, {}}},
                    {{"race", "appraisal"}, {"sex", "appraisal"}, {"race", "experience"},
                     {"sex", "experience"}, {"race", "suitability"}, {"appraisal", "suitability"},
                     {"experience", "suitability"}});
  std::map<std::string, StructuralEquation> eqs;
  eqs.emplace("appraisal",
              equation(graph, "appraisal", 3.0, {{"race=group_b", -0.4}, {"sex=male", 0.1}}, 0.6));
  eqs.emplace("experience",
              equation(graph, "experience", 6.0, {{"race=group_b", -1.0}, {"sex=male", 0.5}}, 2.0));
  eqs.emplace("suitability", equation(graph, "suitability", -3.3,
                                      {{"race=group_b", -0.2}, {"appraisal", 0.8}, {"experience", 0.15}}, 0.5));
  return FittedScm(std::move(graph), std::move(eqs));
}

DecisionSpace job_location_decisions() { return DecisionSpace({"Satellite", "London"}); }

std::vector<Individual> job_location_population(std::size_t staff, std::uint64_t seed) {
  const FittedScm scm = job_location();
  GeneratorConfig config;
  config.n = staff;
  config.seed = seed;
  config.id_prefix = "E";
  config.protected_marginals = {{"race", {0.6, 0.4}}, {"sex", {0.5, 0.5}}};
  std::vector<Individual> people;
  // P moved from the satellite office to London between ticks; Q stayed.
  people.push_back({"P", {{"race", 1.0}, {"sex", 0.0}},
                    {{0, {{"appraisal", 2.2}, {"experience", 5.0}}},
                     {1, {{"appraisal", 4.2}, {"experience", 6.0}}}},
                    0.8});
  people.push_back({"Q", {{"race", 0.0}, {"sex", 1.0}},
                    {{0, {{"appraisal", 2.4}, {"experience", 5.5}}},
                     {1, {{"appraisal", 2.4}, {"experience", 6.5}}}},
                    -0.6});
  for (auto& person : sample_population(scm, config)) people.push_back(std::move(person));
  return people;
}

}  // namespace presets

FittedScm random_linear_scm(std::mt19937_64& rng, std::size_t max_nodes) {
  if (max_nodes < 3) throw Error(ErrorCode::kInvalidArgument, "random SCM needs room for 3 nodes");
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto coin = [&](double p) { return uniform(0.0, 1.0) < p; };
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };

  const std::size_t protected_count = max_nodes >= 4 ? pick(1, 2) : 1;
  const std::size_t observable_count = pick(1, max_nodes - protected_count - 1);
  std::vector<VariableSpec> variables;
  for (std::size_t p = 0; p < protected_count; ++p) {
    VariableSpec spec{"A" + std::to_string(p), Role::kProtected, {}};
    const std::size_t levels = pick(2, 3);
    for (std::size_t l = 0; l < levels; ++l) spec.levels.push_back("l" + std::to_string(l));
    variables.push_back(std::move(spec));
  }
  for (std::size_t o = 0; o < observable_count; ++o) {
    variables.push_back({"X" + std::to_string(o), Role::kObservable, {}});
  }
  variables.push_back({"Y", Role::kOutcome, {}});

  std::vector<Edge> edges;
  for (std::size_t o = 0; o < observable_count; ++o) {
    const std::string child = "X" + std::to_string(o);
    for (std::size_t p = 0; p < protected_count; ++p) {
      if (coin(0.7)) edges.push_back({"A" + std::to_string(p), child});
    }
    for (std::size_t q = 0; q < o; ++q) {
      if (coin(0.5)) edges.push_back({"X" + std::to_string(q), child});
    }
  }
  for (const auto& v : variables) {
    if (v.role != Role::kOutcome && coin(0.6)) edges.push_back({v.name, "Y"});
  }

  CausalGraph graph(std::move(variables), std::move(edges));
  std::map<std::string, StructuralEquation> eqs;
  for (const auto& v : graph.variables()) {
    if (v.role == Role::kProtected) continue;
    StructuralEquation eq;
    eq.child = v.name;
    eq.intercept = uniform(-1.0, 1.0);
    eq.noise_std = uniform(0.1, 1.0);
    eq.terms = expected_terms(graph, v.name);
    for (auto& t : eq.terms) t.weight = uniform(-2.0, 2.0);
    eqs.emplace(v.name, std::move(eq));
  }
  return FittedScm(std::move(graph), std::move(eqs));
}

// ---------------------------------------------------------------------------

std::vector<OracleEquation> oracle_equations(const FittedScm& scm) {
  std::vector<OracleEquation> out;
  for (const auto& name : scm.observable_names()) {
    const StructuralEquation& eq = scm.equation(name);
    out.push_back({eq.child, eq.intercept, eq.terms});
  }
  return out;
}

namespace {

const OracleEquation* find_equation(std::span<const OracleEquation> equations, const std::string& name) {
  for (const auto& eq : equations) {
    if (eq.child == name) return &eq;
  }
  return nullptr;
}

double factual_value(const Individual& individual, std::size_t snapshot_index, const std::string& name) {
  if (auto it = individual.protected_values.find(name); it != individual.protected_values.end()) {
    return it->second;
  }
  const ValueMap& observed = individual.snapshots.at(snapshot_index).observables;
  auto it = observed.find(name);
  if (it == observed.end()) throw Error(ErrorCode::kMissingValue, name);
  return it->second;
}

double structural_part(const OracleEquation& eq, const std::function<double(const std::string&)>& value_of) {
  double total = eq.intercept;
  for (const auto& term : eq.terms) {
    const double v = value_of(term.parent);
    total += term.weight * (term.level ? (v == *term.level ? 1.0 : 0.0) : v);
  }
  return total;
}

}  // namespace

LatentAssignment oracle_abduct(std::span<const OracleEquation> equations, const Individual& individual,
                               std::size_t snapshot_index) {
  LatentAssignment latent;
  auto factual = [&](const std::string& name) { return factual_value(individual, snapshot_index, name); };
  for (const auto& eq : equations) {
    latent.residuals[eq.child] = factual(eq.child) - structural_part(eq, factual);
  }
  return latent;
}

Snapshot oracle_counterfactual(std::span<const OracleEquation> equations, const Individual& individual,
                               std::size_t snapshot_index, const Intervention& intervention) {
  for (const auto& [name, value] : intervention.assignments) {
    if (!individual.protected_values.contains(name)) throw Error(ErrorCode::kUnknownProtected, name);
  }
  auto factual = [&](const std::string& name) { return factual_value(individual, snapshot_index, name); };

  // Plain recursion, no memoization: every request re-derives its ancestors.
  std::function<double(const std::string&)> world_value = [&](const std::string& name) -> double {
    if (auto it = intervention.assignments.find(name); it != intervention.assignments.end()) return it->second;
    const OracleEquation* eq = find_equation(equations, name);
    if (eq == nullptr) return factual(name);
    const double noise = factual(name) - structural_part(*eq, factual);
    return structural_part(*eq, world_value) + noise;
  };

  Snapshot out;
  out.time = individual.snapshots.at(snapshot_index).time;
  for (const auto& eq : equations) out.observables[eq.child] = world_value(eq.child);
  return out;
}

Snapshot oracle_counterfactual(std::span<const OracleEquation> equations, const Individual& individual,
                               const Intervention& intervention) {
  return oracle_counterfactual(equations, individual, individual.label_snapshot(), intervention);
}

std::string_view to_string(Criterion criterion) noexcept {
  switch (criterion) {
    case Criterion::kCounterfactualFairness: return "counterfactual_fairness";
    case Criterion::kDContrast: return "d_contrast";
    case Criterion::kIContrast: return "i_contrast";
    case Criterion::kTContrast: return "t_contrast";
    case Criterion::kContrastMargin: return "contrast_margin";
  }
  return "counterfactual_fairness";
}

std::map<std::string, std::vector<double>, std::less<>> oracle_domain(const CausalGraph& graph) {
  std::map<std::string, std::vector<double>, std::less<>> domain;
  for (const auto* spec : graph.with_role(Role::kProtected)) {
    std::vector<double> values;
    for (std::size_t l = 0; l < spec->levels.size(); ++l) values.push_back(static_cast<double>(l));
    domain.emplace(spec->name, std::move(values));
  }
  return domain;
}

bool oracle_check(std::span<const OracleEquation> equations, const Predictor& predictor,
                  std::span<const Individual> subjects, const OracleParams& params) {
  std::size_t combinations = 1;
  for (const auto& [name, values] : params.domain) combinations *= values.size();
  if (combinations > 16) throw Error(ErrorCode::kDomainTooLarge, std::to_string(combinations) + " combinations");

  // Every full protected assignment, by odometer over the domain map.
  std::vector<Intervention> assignments;
  std::vector<std::size_t> digit(params.domain.size(), 0);
  for (std::size_t c = 0; c < combinations; ++c) {
    Intervention iv;
    std::size_t k = 0;
    for (const auto& [name, values] : params.domain) iv.assignments[name] = values[digit[k++]];
    assignments.push_back(std::move(iv));
    for (std::size_t pos = digit.size(); pos-- > 0;) {
      auto it = std::next(params.domain.begin(), static_cast<std::ptrdiff_t>(pos));
      if (++digit[pos] < it->second.size()) break;
      digit[pos] = 0;
    }
  }

  auto world_score = [&](const Individual& who, std::size_t snap, const Intervention* iv) {
    World world;
    world.latent = oracle_abduct(equations, who, snap);
    world.protected_values = who.protected_values;
    if (iv != nullptr) {
      for (const auto& [name, value] : iv->assignments) world.protected_values[name] = value;
      world.observables = oracle_counterfactual(equations, who, snap, *iv).observables;
    } else {
      world.observables = who.snapshots.at(snap).observables;
    }
    return predictor.score(world);
  };
  auto label_index = [&](const std::string& label) { return predictor.decisions().index_of(label); };
  const Tolerance& tol = params.tol;

  auto invariant = [&](const Individual& who, std::size_t snap, const std::vector<std::size_t>& decisions) {
    const ScoreVector base = world_score(who, snap, nullptr);
    for (const auto& iv : assignments) {
      const ScoreVector moved = world_score(who, snap, &iv);
      for (std::size_t d : decisions) {
        if (!(std::abs(moved[d] - base[d]) <= tol.eps_fair)) return false;
      }
    }
    return true;
  };
  auto ahead = [&](const ScoreVector& s, const std::string& hi, const std::string& lo) {
    return s[label_index(hi)] - s[label_index(lo)] > tol.delta_order;
  };
  std::vector<std::size_t> every(predictor.decisions().size());
  std::iota(every.begin(), every.end(), std::size_t{0});

  auto own_assignment = [](const Individual& who) { return Intervention{who.protected_values}; };

  switch (params.criterion) {
    case Criterion::kCounterfactualFairness: {
      const Individual& i = subjects[0];
      return invariant(i, i.label_snapshot(), every);
    }
    case Criterion::kDContrast: {
      const Individual& i = subjects[0];
      const std::size_t s = i.label_snapshot();
      return invariant(i, s, {label_index(params.d), label_index(params.d_prime)}) &&
             ahead(world_score(i, s, nullptr), params.d, params.d_prime);
    }
    case Criterion::kIContrast: {
      const Individual& i = subjects[0];
      const Individual& j = subjects[1];
      const std::size_t si = i.label_snapshot();
      const std::size_t sj = j.label_snapshot();
      const Intervention a_i = own_assignment(i);
      const Intervention a_j = own_assignment(j);
      return invariant(i, si, every) && invariant(j, sj, every) &&
             ahead(world_score(i, si, nullptr), params.d, params.d_prime) &&
             ahead(world_score(j, sj, nullptr), params.d_prime, params.d) &&
             ahead(world_score(i, si, &a_j), params.d, params.d_prime) &&
             ahead(world_score(j, sj, &a_i), params.d_prime, params.d);
    }
    case Criterion::kTContrast: {
      const Individual& i = subjects[0];
      std::size_t at_t = i.snapshots.size();
      std::size_t at_t_prime = i.snapshots.size();
      for (std::size_t s = 0; s < i.snapshots.size(); ++s) {
        if (i.snapshots[s].time == params.t) at_t = s;
        if (i.snapshots[s].time == params.t_prime) at_t_prime = s;
      }
      if (at_t == i.snapshots.size() || at_t_prime == i.snapshots.size()) {
        throw Error(ErrorCode::kUnknownSnapshot, i.id);
      }
      for (std::size_t s = 0; s < i.snapshots.size(); ++s) {
        if (!invariant(i, s, every)) return false;
      }
      return ahead(world_score(i, at_t, nullptr), params.d, params.d_prime) &&
             ahead(world_score(i, at_t_prime, nullptr), params.d_prime, params.d);
    }
    case Criterion::kContrastMargin: {
      const Individual& i = subjects[0];
      const Individual& j = subjects[1];
      const std::size_t si = i.label_snapshot();
      const std::size_t sj = j.label_snapshot();
      const std::size_t d = label_index(params.d);
      const std::size_t d_prime = label_index(params.d_prime);
      for (const auto& shared : {own_assignment(i), own_assignment(j)}) {
        const ScoreVector score_i = world_score(i, si, &shared);
        const ScoreVector score_j = world_score(j, sj, &shared);
        if (!(score_i[d] - score_j[d] - tol.lambda_margin > 0.0)) return false;
        if (tol.strict_margin && !(score_j[d_prime] - score_i[d_prime] - tol.lambda_margin > 0.0)) return false;
      }
      return true;
    }
  }
  return false;
}

}  // namespace contrafair
