#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "contrafair/predictor.hpp"
#include "contrafair/synth.hpp"

namespace contrafair::testing {

// Random model, random predictor over it, two subjects with two ticks each
// and a pair of distinct decisions.
struct RandomCase {
  FittedScm scm;
  Predictor predictor;
  std::vector<Individual> people;
  std::string d;
  std::string d_prime;
};

inline RandomCase random_case(std::mt19937_64& rng) {
  FittedScm scm = random_linear_scm(rng, 6);
  std::uniform_int_distribution<int> pick(0, 7);
  const int f = pick(rng);
  // Half the draws use the residual family so that passing verdicts occur.
  const Family family = f < 4 ? Family::kCounterfactual
                              : (f == 4 ? Family::kFull : (f == 5 ? Family::kUnaware : Family::kContrastive));
  const bool three = pick(rng) % 3 == 0;
  DecisionSpace decisions(three ? std::vector<std::string>{"a", "b", "c"} : std::vector<std::string>{"a", "b"});
  const auto inputs = default_inputs(family, scm.graph());
  const std::size_t hidden = family == Family::kContrastive && pick(rng) % 2 == 0 ? 2 : 0;
  Network net = Network::zeros(inputs.size(), hidden, logit_count(decisions.size()));
  std::normal_distribution<double> weight(0.0, 1.5);
  std::vector<double> params(net.parameter_count());
  for (double& v : params) v = weight(rng);
  net.assign(params);
  Predictor predictor(family, decisions, inputs, net);

  GeneratorConfig gen = uniform_config(scm, 2, rng());
  gen.snapshots_per_individual = 2;
  for (const auto& spec : scm.graph().variables()) {
    if (spec.role == Role::kObservable) {
      gen.drift[spec.name] = weight(rng);
      break;
    }
  }
  auto people = sample_population(scm, gen);
  std::vector<std::string> labels = decisions.labels();
  std::shuffle(labels.begin(), labels.end(), rng);
  return {std::move(scm), std::move(predictor), std::move(people), labels[0], labels[1]};
}

// ||analytic - central difference|| / max(||analytic||_inf, ||numeric||_inf),
// step h = 1e-5.
inline double gradient_relative_error(const TrainingObjective& objective, const std::vector<double>& params) {
  std::vector<double> analytic(params.size());
  objective.evaluate(params, analytic);
  std::vector<double> numeric(params.size());
  const double h = 1e-5;
  std::vector<double> probe = params;
  for (std::size_t k = 0; k < params.size(); ++k) {
    probe[k] = params[k] + h;
    const double up = objective.evaluate(probe);
    probe[k] = params[k] - h;
    const double down = objective.evaluate(probe);
    probe[k] = params[k];
    numeric[k] = (up - down) / (2 * h);
  }
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    diff += (analytic[k] - numeric[k]) * (analytic[k] - numeric[k]);
    scale = std::max({scale, std::abs(analytic[k]), std::abs(numeric[k])});
  }
  return std::sqrt(diff) / std::max(scale, 1e-8);
}

}  // namespace contrafair::testing
