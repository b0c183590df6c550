#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "builders.hpp"
#include "randomized.hpp"
#include "contrafair/predictor.hpp"
#include "contrafair/synth.hpp"

namespace contrafair {
namespace {

using testing::code_of;
using testing::gradient_relative_error;
using testing::person;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<Individual> fix_a_population(std::size_t n, std::uint64_t seed) {
  return sample_population(presets::fix_a(), presets::fix_a_config(n, seed));
}

TrainConfig fix_a_training(Family family, double lambda = 0.0) {
  TrainConfig c;
  c.family = family;
  c.penalty_weight = lambda;
  c.seed = 17;
  c.outcome_threshold = presets::kFixAThreshold;
  return c;
}

TEST(DecisionSpace, NeedsTwoDistinctLabels) {
  EXPECT_THROW(DecisionSpace({"only"}), Error);
  EXPECT_THROW(DecisionSpace({"a", "a"}), Error);
  DecisionSpace d({"deny", "grant"});
  EXPECT_EQ(d.index_of("grant"), 1u);
  EXPECT_FALSE(d.contains("maybe"));
}

TEST(Inputs, FamiliesReadTheirSchema) {
  const FittedScm scm = presets::law_school();
  const CausalGraph& g = scm.graph();
  auto keys = [&](Family f) {
    std::vector<std::string> out;
    for (const auto& feature : default_inputs(f, g)) out.push_back(feature_key(g, feature));
    return out;
  };
  EXPECT_EQ(keys(Family::kFull), (std::vector<std::string>{"GPA", "LSAT", "race=nonwhite", "sex=male"}));
  EXPECT_EQ(keys(Family::kUnaware), (std::vector<std::string>{"GPA", "LSAT"}));
  EXPECT_EQ(keys(Family::kCounterfactual), (std::vector<std::string>{"eps:GPA", "eps:LSAT"}));
  EXPECT_EQ(keys(Family::kContrastive), keys(Family::kFull));
}

TEST(Predict, ResidualWithZeroResidualIsUniform) {
  const FittedScm scm = presets::law_school();
  const Predictor pred =
      linear_predictor(Family::kCounterfactual, scm.graph(), presets::law_school_decisions(), {{"eps:GPA", 1.0}}, 0.0);
  // GPA and LSAT at their structural means, so both residuals are 0.
  const Individual i = person("s", {{"race", 0}, {"sex", 0}}, {{"GPA", 3.2}, {"LSAT", 36.0}});
  const ScoreVector s = predict(pred, scm, i, 0);
  EXPECT_DOUBLE_EQ(s.at("low"), 0.5);
  EXPECT_DOUBLE_EQ(s.at("high"), 0.5);
}

TEST(Predict, ZeroWeightsAreUniform) {
  const FittedScm scm = presets::fix_a();
  const Predictor pred = linear_predictor(Family::kFull, scm.graph(), presets::fix_a_decisions(), {}, 0.0);
  for (const auto& p : fix_a_population(20, 1)) {
    const ScoreVector s = predict(pred, scm, p, 0);
    EXPECT_EQ(s[0], 0.5);
    EXPECT_EQ(s[1], 0.5);
  }
}

TEST(Predict, HandSetLogisticMatchesSigmoid) {
  const FittedScm scm = presets::law_school();
  const Predictor pred = linear_predictor(Family::kFull, scm.graph(), presets::law_school_decisions(),
                                          {{"GPA", 0.8}, {"LSAT", -0.05}, {"race=nonwhite", 0.3}}, -0.4);
  const Individual i = person("s", {{"race", 1}, {"sex", 0}}, {{"GPA", 3.1}, {"LSAT", 31.0}});
  const double expected = sigmoid(-0.4 + 0.8 * 3.1 - 0.05 * 31.0 + 0.3);
  const ScoreVector s = predict(pred, scm, i, 0);
  EXPECT_NEAR(s.at("high"), expected, 1e-9);
  EXPECT_NEAR(s.at("low") + s.at("high"), 1.0, 1e-12);
}

TEST(Predict, UnknownWeightKeyRejected) {
  const FittedScm scm = presets::fix_a();
  EXPECT_EQ(code_of([&] {
              linear_predictor(Family::kUnaware, scm.graph(), presets::fix_a_decisions(), {{"A=1", 1.0}}, 0.0);
            }),
            ErrorCode::kSchemaMismatch);
}

TEST(Predict, SchemaChecks) {
  const FittedScm scm = presets::fix_a();
  const auto inputs = default_inputs(Family::kCounterfactual, scm.graph());
  EXPECT_EQ(code_of([&] {
              Predictor(Family::kUnaware, presets::fix_a_decisions(), inputs, Network::zeros(inputs.size(), 0, 1));
            }),
            ErrorCode::kSchemaMismatch);
  EXPECT_EQ(code_of([&] {
              Predictor(Family::kCounterfactual, presets::fix_a_decisions(), inputs, Network::zeros(inputs.size(), 2, 1));
            }),
            ErrorCode::kSchemaMismatch);
  const Predictor pred = linear_predictor(Family::kFull, scm.graph(), presets::fix_a_decisions(), {{"X", 1.0}}, 0.0);
  const Individual missing = person("m", {{"A", 1}}, {});
  EXPECT_EQ(code_of([&] { predict(pred, scm, missing, 0); }), ErrorCode::kMissingValue);
}

TEST(Predict, SoftmaxScoresSumToOne) {
  const FittedScm scm = presets::fix_a();
  const auto inputs = default_inputs(Family::kFull, scm.graph());
  Network net = Network::zeros(inputs.size(), 0, 3);
  net.w2 = {0.3, -1.0, 0.7, 0.2, -0.4, 0.9};
  net.b2 = {0.1, 0.0, -0.2};
  const Predictor pred(Family::kFull, DecisionSpace({"a", "b", "c"}), inputs, net);
  for (const auto& p : fix_a_population(50, 2)) {
    const ScoreVector s = predict(pred, scm, p, 0);
    EXPECT_NEAR(std::accumulate(s.values.begin(), s.values.end(), 0.0), 1.0, 1e-12);
    for (double v : s.values) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
  }
}

TEST(CounterfactualScore, ResidualFamilyIsInvariant) {
  const FittedScm scm = presets::law_school();
  const Predictor pred = linear_predictor(Family::kCounterfactual, scm.graph(), presets::law_school_decisions(),
                                          {{"eps:GPA", 2.0}, {"eps:LSAT", 0.3}}, 0.1);
  const auto interventions = enumerate_interventions(scm.graph());
  for (const auto& p : sample_population(scm, presets::law_school_config(100, 5))) {
    const ScoreVector base = predict(pred, scm, p, 0);
    for (const auto& iv : interventions) {
      const ScoreVector moved = counterfactual_score(pred, scm, p, 0, iv);
      EXPECT_EQ(moved.values, base.values);
    }
  }
}

TEST(CounterfactualScore, FactualInterventionEqualsPredict) {
  const FittedScm scm = presets::fix_a();
  const Predictor pred =
      linear_predictor(Family::kFull, scm.graph(), presets::fix_a_decisions(), {{"X", 0.7}, {"A=1", 1.3}}, -1.0);
  for (const auto& p : fix_a_population(30, 3)) {
    EXPECT_EQ(counterfactual_score(pred, scm, p, 0, Intervention{p.protected_values}).values,
              predict(pred, scm, p, 0).values);
  }
}

TEST(CounterfactualScore, FullFamilyReadsRegeneratedFeatures) {
  const FittedScm scm = presets::fix_a();
  const Predictor pred =
      linear_predictor(Family::kFull, scm.graph(), presets::fix_a_decisions(), {{"X", 0.5}, {"A=1", 2.0}}, -1.0);
  const Individual i = person("i", {{"A", 1}}, {{"X", 4.0}});
  const ScoreVector moved = counterfactual_score(pred, scm, i, 0, {{{"A", 0.0}}});
  // X' = 2, A = 0
  EXPECT_NEAR(moved.at("grant"), sigmoid(-1.0 + 0.5 * 2.0), 1e-12);
  EXPECT_NEAR(predict(pred, scm, i, 0).at("grant"), sigmoid(-1.0 + 0.5 * 4.0 + 2.0), 1e-12);
}

TEST(Penalty, ResidualAndConstantPredictorsAreZero) {
  const FittedScm scm = presets::fix_a();
  const auto batch = fix_a_population(100, 7);
  const Predictor residual =
      linear_predictor(Family::kCounterfactual, scm.graph(), presets::fix_a_decisions(), {{"eps:X", 3.0}}, 0.5);
  const Predictor constant = linear_predictor(Family::kFull, scm.graph(), presets::fix_a_decisions(), {}, 0.5);
  EXPECT_EQ(contrastive_penalty(residual, scm, batch), 0.0);
  EXPECT_EQ(contrastive_penalty(constant, scm, batch), 0.0);
}

TEST(Penalty, MatchesIndependentDoubleLoop) {
  const FittedScm scm = presets::fix_a();
  const auto batch = fix_a_population(100, 7);
  const double w_x = 0.4;
  const double w_a = 1.0;
  const double bias = -0.3;
  const Predictor pred =
      linear_predictor(Family::kFull, scm.graph(), presets::fix_a_decisions(), {{"X", w_x}, {"A=1", w_a}}, bias);

  const auto equations = oracle_equations(scm);
  double total = 0.0;
  std::size_t terms = 0;
  for (const auto& p : batch) {
    const double a = p.protected_values.at("A");
    const double p_grant = sigmoid(bias + w_x * p.snapshots[0].observables.at("X") + w_a * a);
    for (double a_prime : {0.0, 1.0}) {
      const Snapshot cf = oracle_counterfactual(equations, p, {{{"A", a_prime}}});
      const double q_grant = sigmoid(bias + w_x * cf.observables.at("X") + w_a * a_prime);
      const double per_decision[] = {std::abs((1 - p_grant) - (1 - q_grant)), std::abs(p_grant - q_grant)};
      total += *std::max_element(std::begin(per_decision), std::end(per_decision));
      ++terms;
    }
  }
  const double penalty = contrastive_penalty(pred, scm, batch);
  EXPECT_GT(penalty, 0.0);
  EXPECT_NEAR(penalty, total / static_cast<double>(terms), 1e-12);
}

TEST(Penalty, ExplicitInterventionsAndEmptyBatch) {
  const FittedScm scm = presets::fix_a();
  const Predictor pred = linear_predictor(Family::kFull, scm.graph(), presets::fix_a_decisions(), {{"A=1", 1.0}}, 0.0);
  const auto batch = fix_a_population(10, 1);
  const std::vector<Intervention> to_zero{{{{"A", 0.0}}}};
  EXPECT_GT(contrastive_penalty(pred, scm, batch, to_zero), 0.0);
  EXPECT_EQ(code_of([&] { contrastive_penalty(pred, scm, std::vector<Individual>{}); }), ErrorCode::kEmptyBatch);
}

TEST(Outcome, ThresholdAndLevels) {
  const FittedScm scm = presets::fix_a();
  const DecisionSpace d = presets::fix_a_decisions();
  EXPECT_EQ(decision_for_outcome(scm.graph(), d, 0.1, 0.1), 1u);
  EXPECT_EQ(decision_for_outcome(scm.graph(), d, 0.1, 0.0999), 0u);
  EXPECT_EQ(code_of([&] { decision_for_outcome(scm.graph(), d, std::nullopt, 1.0); }), ErrorCode::kSchemaMismatch);
  const FittedScm chain = testing::chain_scm();
  EXPECT_EQ(decision_for_outcome(chain.graph(), DecisionSpace({"yes", "no"}), std::nullopt, 1.0), 0u);
}

class GradientCheck : public ::testing::TestWithParam<int> {};

TEST_P(GradientCheck, PenalizedObjective) {
  const int hidden = GetParam();
  const FittedScm scm = presets::fix_a();
  const auto rows = fix_a_population(60, 12);
  TrainConfig config = fix_a_training(Family::kContrastive, 2.5);
  config.hidden_width = hidden;
  config.l2 = 0.01;
  const TrainingObjective objective(config, scm, rows, presets::fix_a_decisions());
  std::mt19937_64 rng(99);
  std::normal_distribution<double> draw(0.0, 0.8);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> params(objective.parameter_count());
    for (double& v : params) v = draw(rng);
    EXPECT_LE(gradient_relative_error(objective, params), 1e-4) << "trial " << trial;
  }
}

INSTANTIATE_TEST_SUITE_P(Widths, GradientCheck, ::testing::Values(0, 3));

TEST(GradientCheckSoftmax, ThreeDecisions) {
  CausalGraph g({{"A", Role::kProtected, {"0", "1"}}, {"X", Role::kObservable, {}},
                 {"Y", Role::kOutcome, {"low", "mid", "high"}}},
                {{"A", "X"}, {"X", "Y"}});
  std::map<std::string, StructuralEquation> eqs;
  eqs.emplace("X", testing::make_equation(g, "X", 1.0, {{"A=1", 2.0}}, 0.5));
  const FittedScm scm(g, std::move(eqs));
  GeneratorConfig gen;
  gen.n = 40;
  gen.seed = 3;
  gen.protected_marginals = {{"A", {0.5, 0.5}}};
  auto rows = sample_population(scm, gen);
  for (auto& r : rows) {
    const double x = r.snapshots[0].observables.at("X");
    r.outcome = x < 1.5 ? 0.0 : (x < 2.5 ? 1.0 : 2.0);
  }
  TrainConfig config;
  config.family = Family::kContrastive;
  config.penalty_weight = 1.0;
  config.hidden_width = 2;
  const TrainingObjective objective(config, scm, rows, DecisionSpace({"low", "mid", "high"}));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> draw(0.0, 0.8);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> params(objective.parameter_count());
    for (double& v : params) v = draw(rng);
    EXPECT_LE(gradient_relative_error(objective, params), 1e-4) << "trial " << trial;
  }
}

TEST(Train, SeparableToyReachesPerfectAccuracy) {
  CausalGraph g({{"A", Role::kProtected, {"0", "1"}}, {"X1", Role::kObservable, {}}, {"X2", Role::kObservable, {}},
                 {"Y", Role::kOutcome, {"neg", "pos"}}},
                {{"X1", "Y"}, {"X2", "Y"}});
  std::vector<Individual> rows;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  while (rows.size() < 200) {
    const double x1 = u(rng);
    const double x2 = u(rng);
    const double side = x1 + 2.0 * x2;
    if (std::abs(side) < 0.2) continue;  // keep a clear margin
    rows.push_back(person("r" + std::to_string(rows.size()), {{"A", rows.size() % 2}}, {{"X1", x1}, {"X2", x2}},
                          side > 0 ? 1.0 : 0.0));
  }
  const FittedScm scm = fit_scm(g, rows);
  TrainConfig config;
  config.family = Family::kUnaware;
  config.epochs = 500;
  config.l2 = 0.0;
  const Predictor pred = train(config, scm, rows, DecisionSpace({"neg", "pos"}));
  EXPECT_EQ(accuracy(pred, scm, rows, std::nullopt), 1.0);
  EXPECT_EQ(pred.metrics().at("train_accuracy"), 1.0);
}

TEST(Train, ZeroLambdaContrastiveMatchesFull) {
  const FittedScm scm = presets::fix_a();
  const auto rows = fix_a_population(400, 21);
  const Predictor full = train(fix_a_training(Family::kFull), scm, rows, presets::fix_a_decisions());
  const Predictor contrastive = train(fix_a_training(Family::kContrastive, 0.0), scm, rows, presets::fix_a_decisions());
  const auto a = full.network().flatten();
  const auto b = contrastive.network().flatten();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-6);
}

TEST(Train, Deterministic) {
  const FittedScm scm = presets::fix_a();
  const auto rows = fix_a_population(300, 22);
  TrainConfig config = fix_a_training(Family::kContrastive, 1.0);
  config.hidden_width = 3;
  config.epochs = 200;
  const auto a = train(config, scm, rows, presets::fix_a_decisions()).network().flatten();
  const auto b = train(config, scm, rows, presets::fix_a_decisions()).network().flatten();
  EXPECT_EQ(a, b);
}

TEST(Train, PenaltyShrinksBiasedModel) {
  const FittedScm scm = presets::fix_a();
  const auto rows = fix_a_population(2000, 23);
  const Predictor plain = train(fix_a_training(Family::kContrastive, 0.0), scm, rows, presets::fix_a_decisions());
  const Predictor fair = train(fix_a_training(Family::kContrastive, 10.0), scm, rows, presets::fix_a_decisions());
  const double before = contrastive_penalty(plain, scm, rows);
  const double after = contrastive_penalty(fair, scm, rows);
  EXPECT_LE(after, 0.1 * before);
  EXPECT_NEAR(fair.metrics().at("train_penalty"), after, 1e-9);
}

// Below this level the trained penalty is dominated by optimizer noise and
// carries no ordering information.
constexpr double kPenaltyResolution = 1e-4;

TEST(Train, PenaltyNonIncreasingInLambda) {
  const FittedScm scm = presets::fix_a();
  const auto rows = fix_a_population(1500, 24);
  double previous = std::numeric_limits<double>::infinity();
  for (double lambda : {0.0, 0.1, 1.0, 10.0}) {
    const Predictor pred = train(fix_a_training(Family::kContrastive, lambda), scm, rows, presets::fix_a_decisions());
    const double penalty = contrastive_penalty(pred, scm, rows);
    if (previous > kPenaltyResolution || penalty > kPenaltyResolution) {
      EXPECT_LE(penalty, previous) << "lambda " << lambda;
    }
    previous = penalty;
  }
}

TEST(Train, Errors) {
  const FittedScm scm = presets::fix_a();
  auto rows = fix_a_population(50, 25);
  TrainConfig diverging = fix_a_training(Family::kFull);
  diverging.learning_rate = 1e305;
  diverging.l2 = 1.0;
  EXPECT_EQ(code_of([&] { train(diverging, scm, rows, presets::fix_a_decisions()); }), ErrorCode::kNonFiniteLoss);

  rows[3].outcome.reset();
  EXPECT_EQ(code_of([&] { train(fix_a_training(Family::kFull), scm, rows, presets::fix_a_decisions()); }),
            ErrorCode::kMissingOutcome);

  TrainConfig misplaced = fix_a_training(Family::kFull, 1.0);
  EXPECT_EQ(code_of([&] { misplaced.validate(); }), ErrorCode::kInvalidArgument);
}

}  // namespace
}  // namespace contrafair
