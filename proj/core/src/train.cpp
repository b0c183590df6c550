#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "contrafair/error.hpp"
#include "contrafair/predictor.hpp"

namespace contrafair {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;

double softplus(double z) noexcept { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double logistic(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct Pass {
  Eigen::MatrixXd hidden;  // n x H, empty for linear models
  Eigen::MatrixXd logits;  // n x outputs
  Eigen::MatrixXd probs;   // n x decisions
};

}  // namespace

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::kInvalidArgument, what); };
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) bad("learning_rate must be positive");
  if (!(final_lr_fraction > 0.0) || final_lr_fraction > 1.0) bad("final_lr_fraction must be in (0, 1]");
  if (epochs <= 0) bad("epochs must be positive");
  if (!(penalty_weight >= 0.0) || !std::isfinite(penalty_weight)) bad("penalty_weight must be >= 0");
  if (!(l2 >= 0.0) || !std::isfinite(l2)) bad("l2 must be >= 0");
  if (hidden_width < 0) bad("hidden_width must be >= 0");
  if (family != Family::kContrastive && penalty_weight != 0.0) {
    bad("penalty_weight applies to the contrastive family only");
  }
  if (family != Family::kContrastive && hidden_width != 0) {
    bad("hidden_width applies to the contrastive family only");
  }
}

struct TrainingObjective::Impl {
  TrainConfig config;
  DecisionSpace decisions;
  std::vector<Feature> inputs;
  std::size_t hidden = 0;
  std::size_t outputs = 0;
  Eigen::MatrixXd x;                  // n x inputs, standardized
  std::vector<Eigen::MatrixXd> x_cf;  // one per intervention
  Eigen::VectorXi labels;
  bool has_counterfactuals = false;

  Network shape() const { return Network::zeros(inputs.size(), hidden, outputs); }

  Pass forward(const Network& net, const Eigen::MatrixXd& in) const {
    Pass pass;
    const Eigen::Index n = in.rows();
    const Eigen::Index k = static_cast<Eigen::Index>(decisions.size());
    const auto out = static_cast<Eigen::Index>(outputs);
    const Eigen::VectorXd b2 = Eigen::Map<const Eigen::VectorXd>(net.b2.data(), out);
    if (hidden > 0) {
      const auto h = static_cast<Eigen::Index>(hidden);
      ConstRowMap w1(net.w1.data(), h, in.cols());
      const Eigen::VectorXd b1 = Eigen::Map<const Eigen::VectorXd>(net.b1.data(), h);
      pass.hidden = ((in * w1.transpose()).rowwise() + b1.transpose()).array().tanh().matrix();
      ConstRowMap w2(net.w2.data(), out, h);
      pass.logits = (pass.hidden * w2.transpose()).rowwise() + b2.transpose();
    } else {
      ConstRowMap w2(net.w2.data(), out, in.cols());
      pass.logits = (in * w2.transpose()).rowwise() + b2.transpose();
    }
    pass.probs.resize(n, k);
    if (k == 2) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double p = logistic(pass.logits(i, 0));
        pass.probs(i, 1) = p;
        pass.probs(i, 0) = 1.0 - p;
      }
    } else {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double top = pass.logits.row(i).maxCoeff();
        const Eigen::RowVectorXd e = (pass.logits.row(i).array() - top).exp().matrix();
        pass.probs.row(i) = e / e.sum();
      }
    }
    return pass;
  }

  // d probs(i, d) / d logits(i, :), written into `row`.
  void prob_jacobian_row(const Pass& pass, Eigen::Index i, Eigen::Index d, Eigen::Ref<Eigen::RowVectorXd> row) const {
    if (decisions.size() == 2) {
      const double p = pass.probs(i, 1);
      row(0) = (d == 1 ? 1.0 : -1.0) * p * (1.0 - p);
      return;
    }
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      row(j) = pass.probs(i, d) * ((j == d ? 1.0 : 0.0) - pass.probs(i, j));
    }
  }

  // Accumulates parameter gradients for upstream logit gradient `g_logits`.
  void backward(const Network& net, const Eigen::MatrixXd& in, const Pass& pass,
                const Eigen::MatrixXd& g_logits, Network& grad) const {
    const auto out = static_cast<Eigen::Index>(outputs);
    Eigen::Map<Eigen::VectorXd>(grad.b2.data(), out) += g_logits.colwise().sum().transpose();
    if (hidden > 0) {
      const auto h = static_cast<Eigen::Index>(hidden);
      RowMap(grad.w2.data(), out, h) += g_logits.transpose() * pass.hidden;
      ConstRowMap w2(net.w2.data(), out, h);
      const Eigen::MatrixXd g_hidden =
          ((g_logits * w2).array() * (1.0 - pass.hidden.array().square())).matrix();
      RowMap(grad.w1.data(), h, in.cols()) += g_hidden.transpose() * in;
      Eigen::Map<Eigen::VectorXd>(grad.b1.data(), h) += g_hidden.colwise().sum().transpose();
    } else {
      RowMap(grad.w2.data(), out, in.cols()) += g_logits.transpose() * in;
    }
  }

  double penalty_and_grad(const Network& net, const Pass& factual, Eigen::MatrixXd* g_factual,
                          Network* grad, double weight) const {
    if (!has_counterfactuals) {
      throw Error(ErrorCode::kContinuousProtectedUnenumerable,
                  "penalty needs an enumerable protected domain");
    }
    const Eigen::Index n = x.rows();
    const double norm = 1.0 / static_cast<double>(n * static_cast<Eigen::Index>(x_cf.size()));
    double total = 0.0;
    Eigen::RowVectorXd jac(static_cast<Eigen::Index>(outputs));
    for (const auto& xc : x_cf) {
      const Pass moved = forward(net, xc);
      Eigen::MatrixXd g_moved;
      if (grad) g_moved = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(outputs));
      for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index worst = 0;
        double gap = 0.0;
        for (Eigen::Index d = 0; d < factual.probs.cols(); ++d) {
          const double delta = std::abs(factual.probs(i, d) - moved.probs(i, d));
          if (delta > gap) {
            gap = delta;
            worst = d;
          }
        }
        total += gap;
        if (grad && gap > 0.0) {
          const double sign = factual.probs(i, worst) > moved.probs(i, worst) ? 1.0 : -1.0;
          prob_jacobian_row(factual, i, worst, jac);
          g_factual->row(i) += weight * norm * sign * jac;
          prob_jacobian_row(moved, i, worst, jac);
          g_moved.row(i) -= weight * norm * sign * jac;
        }
      }
      if (grad) backward(net, xc, moved, g_moved, *grad);
    }
    return total * norm;
  }

  double evaluate(std::span<const double> parameters, std::span<double> gradient) const {
    Network net = shape();
    net.assign(parameters);
    const Eigen::Index n = x.rows();
    const Pass pass = forward(net, x);

    double loss = 0.0;
    const bool want_grad = !gradient.empty();
    Eigen::MatrixXd g_logits;
    if (want_grad) g_logits = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(outputs));
    const double inv_n = 1.0 / static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int y = labels(i);
      if (decisions.size() == 2) {
        const double z = pass.logits(i, 0);
        loss += softplus(z) - (y == 1 ? z : 0.0);
        if (want_grad) g_logits(i, 0) = (pass.probs(i, 1) - (y == 1 ? 1.0 : 0.0)) * inv_n;
      } else {
        const double top = pass.logits.row(i).maxCoeff();
        const double lse = top + std::log((pass.logits.row(i).array() - top).exp().sum());
        loss += lse - pass.logits(i, y);
        if (want_grad) {
          g_logits.row(i) = pass.probs.row(i) * inv_n;
          g_logits(i, y) -= inv_n;
        }
      }
    }
    loss *= inv_n;

    Network grad = shape();
    double weight_norm = 0.0;
    for (double w : net.w1) weight_norm += w * w;
    for (double w : net.w2) weight_norm += w * w;
    loss += 0.5 * config.l2 * weight_norm;

    const double lambda = config.family == Family::kContrastive ? config.penalty_weight : 0.0;
    if (lambda > 0.0) {
      loss += lambda * penalty_and_grad(net, pass, want_grad ? &g_logits : nullptr,
                                        want_grad ? &grad : nullptr, lambda);
    }
    if (want_grad) {
      backward(net, x, pass, g_logits, grad);
      for (std::size_t i = 0; i < net.w1.size(); ++i) grad.w1[i] += config.l2 * net.w1[i];
      for (std::size_t i = 0; i < net.w2.size(); ++i) grad.w2[i] += config.l2 * net.w2[i];
      const std::vector<double> flat = grad.flatten();
      if (gradient.size() != flat.size()) {
        throw Error(ErrorCode::kSchemaMismatch, "gradient buffer has the wrong length");
      }
      std::copy(flat.begin(), flat.end(), gradient.begin());
    }
    return loss;
  }
};

TrainingObjective::TrainingObjective(const TrainConfig& config, const FittedScm& scm,
                                     std::span<const Individual> dataset, const DecisionSpace& decisions)
    : impl_(std::make_unique<Impl>()) {
  config.validate();
  if (dataset.empty()) throw Error(ErrorCode::kEmptyBatch, "training on an empty dataset");
  Impl& m = *impl_;
  m.config = config;
  m.decisions = decisions;
  if (decisions.size() < 2) throw Error(ErrorCode::kInvalidArgument, "empty decision space");
  m.inputs = default_inputs(config.family, scm.graph());
  m.hidden = static_cast<std::size_t>(config.hidden_width);
  m.outputs = logit_count(decisions.size());

  const auto n = static_cast<Eigen::Index>(dataset.size());
  const auto p = static_cast<Eigen::Index>(m.inputs.size());
  m.x.resize(n, p);
  m.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Individual& row = dataset[static_cast<std::size_t>(i)];
    if (!row.outcome) throw Error(ErrorCode::kMissingOutcome, "individual '" + row.id + "'");
    m.labels(i) = static_cast<int>(
        decision_for_outcome(scm.graph(), decisions, config.outcome_threshold, *row.outcome));
    const World world = factual_world(scm, row, row.label_snapshot());
    for (Eigen::Index j = 0; j < p; ++j) m.x(i, j) = m.inputs[static_cast<std::size_t>(j)].read(world);
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    Feature& f = m.inputs[static_cast<std::size_t>(j)];
    f.shift = m.x.col(j).mean();
    const double spread = std::sqrt((m.x.col(j).array() - f.shift).square().mean());
    f.scale = spread > 1e-12 ? spread : 1.0;
    m.x.col(j) = (m.x.col(j).array() - f.shift) / f.scale;
  }

  std::vector<Intervention> interventions;
  try {
    interventions = enumerate_interventions(scm.graph(), config.grid);
    m.has_counterfactuals = true;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kContinuousProtectedUnenumerable) throw;
    if (config.family == Family::kContrastive && config.penalty_weight > 0.0) throw;
  }
  if (m.has_counterfactuals) {
    for (const auto& intervention : interventions) {
      Eigen::MatrixXd xc(n, p);
      for (Eigen::Index i = 0; i < n; ++i) {
        const Individual& row = dataset[static_cast<std::size_t>(i)];
        const World world = counterfactual_world(scm, row, row.label_snapshot(), intervention);
        for (Eigen::Index j = 0; j < p; ++j) {
          const Feature& f = m.inputs[static_cast<std::size_t>(j)];
          xc(i, j) = (f.read(world) - f.shift) / f.scale;
        }
      }
      m.x_cf.push_back(std::move(xc));
    }
  }
}

TrainingObjective::~TrainingObjective() = default;
TrainingObjective::TrainingObjective(TrainingObjective&&) noexcept = default;
TrainingObjective& TrainingObjective::operator=(TrainingObjective&&) noexcept = default;

std::size_t TrainingObjective::parameter_count() const noexcept { return impl_->shape().parameter_count(); }

std::vector<double> TrainingObjective::initial_parameters() const {
  Network net = impl_->shape();
  std::mt19937_64 rng(impl_->config.seed);
  if (net.hidden > 0) {
    std::normal_distribution<double> first(0.0, 1.0 / std::sqrt(static_cast<double>(net.inputs)));
    for (double& w : net.w1) w = first(rng);
    std::normal_distribution<double> second(0.0, 1.0 / std::sqrt(static_cast<double>(net.hidden)));
    for (double& w : net.w2) w = second(rng);
  } else {
    std::normal_distribution<double> small(0.0, 0.01);
    for (double& w : net.w2) w = small(rng);
  }
  return net.flatten();
}

double TrainingObjective::evaluate(std::span<const double> parameters, std::span<double> gradient) const {
  return impl_->evaluate(parameters, gradient);
}

double TrainingObjective::penalty(std::span<const double> parameters) const {
  Network net = impl_->shape();
  net.assign(parameters);
  const Pass pass = impl_->forward(net, impl_->x);
  return impl_->penalty_and_grad(net, pass, nullptr, nullptr, 0.0);
}

Predictor TrainingObjective::make_predictor(std::span<const double> parameters) const {
  Network net = impl_->shape();
  net.assign(parameters);
  return Predictor(impl_->config.family, impl_->decisions, impl_->inputs, std::move(net), impl_->config);
}

Predictor train(const TrainConfig& config, const FittedScm& scm, std::span<const Individual> dataset,
                const DecisionSpace& decisions) {
  const TrainingObjective objective(config, scm, dataset, decisions);
  std::vector<double> params = objective.initial_parameters();
  std::vector<double> grad(params.size());
  const double decay =
      config.epochs > 1 ? std::log(config.final_lr_fraction) / static_cast<double>(config.epochs - 1) : 0.0;
  double loss = 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    loss = objective.evaluate(params, grad);
    if (!std::isfinite(loss)) {
      throw Error(ErrorCode::kNonFiniteLoss, "training diverged at epoch " + std::to_string(epoch));
    }
    const double step = config.learning_rate * std::exp(decay * static_cast<double>(epoch));
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= step * grad[i];
  }
  loss = objective.evaluate(params);
  if (!std::isfinite(loss)) {
    throw Error(ErrorCode::kNonFiniteLoss, "training diverged at epoch " + std::to_string(config.epochs));
  }

  Predictor trained = objective.make_predictor(params);
  std::map<std::string, double> metrics{{"train_objective", loss},
                                        {"train_accuracy", accuracy(trained, scm, dataset, config.outcome_threshold)}};
  try {
    metrics.emplace("train_penalty", objective.penalty(params));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kContinuousProtectedUnenumerable) throw;
  }
  return trained.with_metrics(std::move(metrics));
}

}  // namespace contrafair
