#include <benchmark/benchmark.h>

#include "contrafair/fairness.hpp"
#include "contrafair/predictor.hpp"
#include "contrafair/synth.hpp"

namespace cf = contrafair;

namespace {

const cf::FittedScm& law_school() {
  static const cf::FittedScm scm = cf::presets::law_school();
  return scm;
}

std::vector<cf::Individual> population(std::size_t n) {
  return cf::sample_population(law_school(), cf::presets::law_school_config(n, 1));
}

cf::Predictor trained(cf::Family family, double lambda, int epochs) {
  cf::TrainConfig config;
  config.family = family;
  config.penalty_weight = lambda;
  config.epochs = epochs;
  config.outcome_threshold = cf::presets::kLawSchoolThreshold;
  return cf::train(config, law_school(), population(500), cf::presets::law_school_decisions());
}

void BM_FitScm(benchmark::State& state) {
  const auto rows = population(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(cf::fit_scm(law_school().graph(), rows));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitScm)->Arg(1000)->Arg(10000);

void BM_Counterfactual(benchmark::State& state) {
  const auto rows = population(256);
  const cf::Intervention iv{{{"race", 1.0}, {"sex", 0.0}}};
  std::size_t k = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cf::counterfactual(law_school(), rows[k++ % rows.size()], 0, iv));
  }
}
BENCHMARK(BM_Counterfactual);

void BM_Predict(benchmark::State& state) {
  const auto rows = population(256);
  const cf::Predictor pred = trained(cf::Family::kFull, 0.0, 20);
  std::size_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(cf::predict(pred, law_school(), rows[k++ % rows.size()], 0));
}
BENCHMARK(BM_Predict);

void BM_ContrastivePenalty(benchmark::State& state) {
  const auto rows = population(static_cast<std::size_t>(state.range(0)));
  const cf::Predictor pred = trained(cf::Family::kFull, 0.0, 20);
  for (auto _ : state) benchmark::DoNotOptimize(cf::contrastive_penalty(pred, law_school(), rows));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ContrastivePenalty)->Arg(1000);

void BM_CounterfactualFairnessCheck(benchmark::State& state) {
  const auto rows = population(256);
  const cf::Predictor pred = trained(cf::Family::kFull, 0.0, 20);
  std::size_t k = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cf::check_counterfactual_fairness(pred, law_school(), rows[k++ % rows.size()]));
  }
}
BENCHMARK(BM_CounterfactualFairnessCheck);

void BM_TrainContrastive(benchmark::State& state) {
  const auto rows = population(static_cast<std::size_t>(state.range(0)));
  cf::TrainConfig config;
  config.family = cf::Family::kContrastive;
  config.penalty_weight = 10.0;
  config.epochs = 100;
  config.outcome_threshold = cf::presets::kLawSchoolThreshold;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cf::train(config, law_school(), rows, cf::presets::law_school_decisions()));
  }
}
BENCHMARK(BM_TrainContrastive)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
