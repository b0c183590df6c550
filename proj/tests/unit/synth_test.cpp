#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "builders.hpp"
#include "contrafair/synth.hpp"

namespace contrafair {
namespace {

using testing::code_of;

TEST(Sample, SameSeedIsBitIdentical) {
  const FittedScm scm = presets::law_school();
  GeneratorConfig config = presets::law_school_config(300, 42);
  config.snapshots_per_individual = 3;
  config.drift = {{"GPA", 0.1}};
  const auto a = sample_population(scm, config);
  const auto b = sample_population(scm, config);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].id, b[k].id);
    EXPECT_EQ(a[k].protected_values, b[k].protected_values);
    EXPECT_EQ(a[k].outcome, b[k].outcome);
    ASSERT_EQ(a[k].snapshots.size(), 3u);
    for (std::size_t s = 0; s < 3; ++s) {
      EXPECT_EQ(a[k].snapshots[s].time, static_cast<std::int64_t>(s));
      EXPECT_EQ(a[k].snapshots[s].observables, b[k].snapshots[s].observables);
    }
  }
  config.seed = 43;
  EXPECT_NE(sample_population(scm, config)[0].snapshots[0].observables, a[0].snapshots[0].observables);
}

TEST(Sample, PrefixOfLargerPopulationIsStable) {
  const FittedScm scm = presets::fix_a();
  const auto small = sample_population(scm, presets::fix_a_config(10, 5));
  const auto large = sample_population(scm, presets::fix_a_config(50, 5));
  for (std::size_t k = 0; k < small.size(); ++k) {
    EXPECT_EQ(small[k].snapshots[0].observables, large[k].snapshots[0].observables);
  }
}

TEST(Sample, MarginalsWithinSamplingBound) {
  const FittedScm scm = presets::law_school();
  const std::size_t n = 10000;
  const auto people = sample_population(scm, presets::law_school_config(n, 8));
  const GeneratorConfig config = presets::law_school_config(n, 8);
  const double bound = 3.0 / std::sqrt(static_cast<double>(n));
  for (const auto& [name, probs] : config.protected_marginals) {
    std::vector<double> freq(probs.size(), 0.0);
    for (const auto& p : people) freq[static_cast<std::size_t>(p.protected_values.at(name))] += 1.0 / n;
    for (std::size_t l = 0; l < probs.size(); ++l) EXPECT_NEAR(freq[l], probs[l], bound) << name << " " << l;
  }
}

TEST(Sample, FixAMeanMatchesModel) {
  const auto people = sample_population(presets::fix_a(), presets::fix_a_config(10000, 13));
  double total = 0.0;
  for (const auto& p : people) total += p.snapshots[0].observables.at("X");
  // E[X] = 1 + 2 * P(A=1) = 2
  EXPECT_NEAR(total / static_cast<double>(people.size()), 2.0, 0.05);
}

TEST(Sample, DegenerateNoiseGivesIdenticalIndividuals) {
  const FittedScm base = testing::chain_scm();
  std::map<std::string, StructuralEquation> eqs;
  for (const auto& [name, eq] : base.equations()) {
    StructuralEquation quiet = eq;
    quiet.noise_std = 0.0;
    eqs.emplace(name, quiet);
  }
  const FittedScm scm(base.graph(), std::move(eqs));
  GeneratorConfig config;
  config.n = 25;
  config.seed = 1;
  config.protected_marginals = {{"A", {0.0, 1.0}}};
  const auto people = sample_population(scm, config);
  for (const auto& p : people) {
    EXPECT_EQ(p.protected_values.at("A"), 1.0);
    EXPECT_EQ(p.snapshots[0].observables.at("X1"), 1.0);
    EXPECT_EQ(p.snapshots[0].observables.at("X2"), 2.0);
  }
}

TEST(Sample, DriftShiftsLaterTicks) {
  const FittedScm scm = presets::fix_a();
  GeneratorConfig config = presets::fix_a_config(20, 3);
  config.snapshots_per_individual = 2;
  config.drift = {{"X", 1.5}};
  for (const auto& p : sample_population(scm, config)) {
    EXPECT_NEAR(p.snapshots[1].observables.at("X") - p.snapshots[0].observables.at("X"), 1.5, 1e-12);
    // Later snapshots stay consistent with the model: the residual absorbs the drift.
    const LatentAssignment u0 = abduct(scm, p, 0);
    const LatentAssignment u1 = abduct(scm, p, 1);
    EXPECT_NEAR(u1.residuals.at("X") - u0.residuals.at("X"), 1.5, 1e-12);
  }
}

TEST(Sample, InvalidMarginals) {
  const FittedScm scm = presets::fix_a();
  auto bad = [&](std::vector<double> probs) {
    GeneratorConfig config = presets::fix_a_config(10, 1);
    config.protected_marginals["A"] = std::move(probs);
    return code_of([&] { sample_population(scm, config); });
  };
  EXPECT_EQ(bad({0.5, 0.6}), ErrorCode::kInvalidMarginal);
  EXPECT_EQ(bad({1.0}), ErrorCode::kInvalidMarginal);
  EXPECT_EQ(bad({1.2, -0.2}), ErrorCode::kInvalidMarginal);
  GeneratorConfig close = presets::fix_a_config(10, 1);
  close.protected_marginals["A"] = {0.5, 0.5 + 1e-12};
  EXPECT_NO_THROW(sample_population(scm, close));

  GeneratorConfig missing = presets::fix_a_config(10, 1);
  missing.protected_marginals.clear();
  EXPECT_EQ(code_of([&] { sample_population(scm, missing); }), ErrorCode::kInvalidMarginal);
}

TEST(Presets, ShapesAndDecisions) {
  const FittedScm law = presets::law_school();
  EXPECT_EQ(law.protected_names(), (std::vector<std::string>{"race", "sex"}));
  EXPECT_EQ(law.observable_names(), (std::vector<std::string>{"GPA", "LSAT"}));
  EXPECT_EQ(law.outcome_name(), std::optional<std::string>("FYA"));
  EXPECT_EQ(presets::law_school_decisions().labels(), (std::vector<std::string>{"low", "high"}));

  const auto staff = presets::job_location_population(10, 1);
  ASSERT_EQ(staff.size(), 12u);
  const Individual& p = staff[0];
  const Individual& q = staff[1];
  EXPECT_EQ(p.id, "P");
  EXPECT_EQ(q.id, "Q");
  EXPECT_EQ(p.snapshots.size(), 2u);
  EXPECT_EQ(q.snapshots.size(), 2u);
  EXPECT_NE(p.protected_values, q.protected_values);
}

TEST(OracleCounterfactual, FixAExample) {
  const auto equations = oracle_equations(presets::fix_a());
  const Individual i = testing::person("i", {{"A", 1}}, {{"X", 4.0}});
  EXPECT_NEAR(oracle_counterfactual(equations, i, {{{"A", 0.0}}}).observables.at("X"), 2.0, 1e-12);
  EXPECT_EQ(oracle_counterfactual(equations, i, {{{"A", 1.0}}}).observables.at("X"), 4.0);
  EXPECT_NEAR(oracle_abduct(equations, i, 0).residuals.at("X"), 1.0, 1e-12);
}

TEST(OracleCounterfactual, AgreesWithScmOnChain) {
  const FittedScm scm = testing::chain_scm();
  const auto equations = oracle_equations(scm);
  GeneratorConfig config = uniform_config(scm, 200, 77);
  for (const auto& p : sample_population(scm, config)) {
    for (double a : {0.0, 1.0}) {
      const Intervention iv{{{"A", a}}};
      const Snapshot fast = counterfactual(scm, p, p.label_snapshot(), iv);
      const Snapshot slow = oracle_counterfactual(equations, p, p.label_snapshot(), iv);
      for (const auto& [name, value] : fast.observables) EXPECT_NEAR(value, slow.observables.at(name), 1e-12);
    }
  }
}

TEST(OracleCounterfactual, AgreesWithScmOnRandomModels) {
  std::mt19937_64 rng(321);
  for (int trial = 0; trial < 200; ++trial) {
    const FittedScm scm = random_linear_scm(rng, 7);
    const auto equations = oracle_equations(scm);
    const auto people = sample_population(scm, uniform_config(scm, 3, rng()));
    const auto interventions = enumerate_interventions(scm.graph());
    for (const auto& p : people) {
      for (const auto& iv : interventions) {
        const Snapshot fast = counterfactual(scm, p, p.label_snapshot(), iv);
        const Snapshot slow = oracle_counterfactual(equations, p, p.label_snapshot(), iv);
        ASSERT_EQ(fast.observables.size(), slow.observables.size());
        for (const auto& [name, value] : fast.observables) {
          EXPECT_NEAR(value, slow.observables.at(name), 1e-12 * std::max(1.0, std::abs(value)))
              << "trial " << trial << " " << name;
        }
      }
    }
  }
}

TEST(RandomModel, RespectsBounds) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const FittedScm scm = random_linear_scm(rng, 6);
    EXPECT_LE(scm.graph().variables().size(), 6u);
    EXPECT_GE(scm.protected_names().size(), 1u);
    EXPECT_LE(scm.protected_names().size(), 2u);
    EXPECT_NO_THROW(validate_graph(scm.graph()));
  }
  EXPECT_EQ(code_of([&] { random_linear_scm(rng, 2); }), ErrorCode::kInvalidArgument);
}

TEST(OracleCheck, CriterionNames) {
  EXPECT_EQ(to_string(Criterion::kCounterfactualFairness), "counterfactual_fairness");
  EXPECT_EQ(to_string(Criterion::kContrastMargin), "contrast_margin");
}

}  // namespace
}  // namespace contrafair
