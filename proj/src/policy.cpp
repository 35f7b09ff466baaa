#include "rrl/policy.hpp"

#include <cmath>
#include <numbers>

#include "rrl/error.hpp"

namespace rrl {

namespace {

const double kHalfLog2PiE = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

}  // namespace

std::vector<int> standard_layer_dims(int input_dim, int output_dim) {
  return {input_dim, kHiddenUnits, kHiddenUnits, output_dim};
}

MlpModel make_value_network(int observation_dim, Rng& rng) {
  return MlpModel::initialized(standard_layer_dims(observation_dim, 1), rng, kValueOutputScale);
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
  const double top = logits.maxCoeff();
  const Eigen::ArrayXd shifted = logits.array() - top;
  return shifted - std::log(shifted.exp().sum());
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

// --- categorical --------------------------------------------------------------

CategoricalPolicy::CategoricalPolicy(MlpModel network) : network_(std::move(network)) {
  if (network_.output_dim() < 2) throw ArgumentError("categorical policy needs at least 2 logits");
}

CategoricalPolicy CategoricalPolicy::initialized(int observation_dim, int action_count, Rng& rng) {
  return CategoricalPolicy(
      MlpModel::initialized(standard_layer_dims(observation_dim, action_count), rng, kPolicyOutputScale));
}

void CategoricalPolicy::check_observation(Eigen::Index rows) const {
  if (rows != observation_dim()) throw ArgumentError("observation dimension does not match policy input");
}

Eigen::VectorXd CategoricalPolicy::probabilities(const Observation& observation) const {
  check_observation(observation.size());
  return softmax(network_.forward(observation));
}

PolicySample CategoricalPolicy::sample(const Observation& observation, Rng& rng) const {
  check_observation(observation.size());
  const Eigen::VectorXd log_p = log_softmax(network_.forward(observation));
  const Eigen::VectorXd p = log_p.array().exp();
  // Inverse-CDF draw; the last action absorbs rounding in the cumulative sum.
  const double u = uniform01(rng);
  int action = static_cast<int>(p.size()) - 1;
  double cumulative = 0.0;
  for (Eigen::Index a = 0; a < p.size(); ++a) {
    cumulative += p[a];
    if (u < cumulative) {
      action = static_cast<int>(a);
      break;
    }
  }
  return {action, log_p[action], p};
}

LogProbEntropy CategoricalPolicy::log_prob_and_entropy(const Observation& observation, int action) const {
  check_observation(observation.size());
  if (action < 0 || action >= action_count()) throw ArgumentError("action out of range");
  const Eigen::VectorXd log_p = log_softmax(network_.forward(observation));
  const double entropy = -(log_p.array().exp() * log_p.array()).sum();
  return {log_p[action], entropy};
}

PolicyBatchEval CategoricalPolicy::evaluate(const Eigen::MatrixXd& observations,
                                            std::span<const Action> actions) const {
  check_observation(observations.rows());
  if (static_cast<Eigen::Index>(actions.size()) != observations.cols()) {
    throw ArgumentError("observation and action batch sizes differ");
  }
  PolicyBatchEval eval;
  eval.cache = network_.forward_cached(observations);
  const Eigen::MatrixXd& logits = eval.cache.output();
  const Eigen::Index n = logits.cols();
  eval.log_probs.resize(n);
  eval.entropies.resize(n);
  eval.distribution.resize(logits.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = std::get<int>(actions[static_cast<std::size_t>(i)]);
    if (a < 0 || a >= action_count()) throw ArgumentError("action out of range");
    const Eigen::VectorXd log_p = log_softmax(logits.col(i));
    const Eigen::VectorXd p = log_p.array().exp();
    eval.log_probs[i] = log_p[a];
    eval.entropies[i] = -(p.array() * log_p.array()).sum();
    eval.distribution.col(i) = p;
  }
  return eval;
}

PolicyGradient CategoricalPolicy::backward(const PolicyBatchEval& eval, std::span<const Action> actions,
                                           const Eigen::VectorXd& dlogp, const Eigen::VectorXd& dentropy) const {
  const Eigen::MatrixXd& p = eval.distribution;
  Eigen::MatrixXd dlogits(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.cols(); ++i) {
    const int a = std::get<int>(actions[static_cast<std::size_t>(i)]);
    // d log p_a / dz = onehot(a) - p ;  d H / dz_j = -p_j (log p_j + H)
    Eigen::VectorXd col = -dlogp[i] * p.col(i);
    col[a] += dlogp[i];
    const Eigen::ArrayXd log_p = p.col(i).array().max(1e-300).log();
    col.array() -= dentropy[i] * p.col(i).array() * (log_p + eval.entropies[i]);
    dlogits.col(i) = col;
  }
  return {network_.backward_batch(eval.cache, dlogits), Eigen::VectorXd()};
}

// --- gaussian -----------------------------------------------------------------

GaussianPolicy::GaussianPolicy(MlpModel network, Eigen::VectorXd log_std, double rpo_alpha)
    : network_(std::move(network)), log_std_(std::move(log_std)), rpo_alpha_(rpo_alpha) {
  if (log_std_.size() != network_.output_dim()) throw ArgumentError("log_std length must equal action dim");
  if (!(rpo_alpha_ >= 0.0)) throw ArgumentError("rpo_alpha must be non-negative");
}

GaussianPolicy GaussianPolicy::initialized(int observation_dim, int action_dim, double rpo_alpha, Rng& rng) {
  return GaussianPolicy(
      MlpModel::initialized(standard_layer_dims(observation_dim, action_dim), rng, kPolicyOutputScale),
      Eigen::VectorXd::Zero(action_dim), rpo_alpha);
}

void GaussianPolicy::check_observation(Eigen::Index rows) const {
  if (rows != observation_dim()) throw ArgumentError("observation dimension does not match policy input");
}

Eigen::VectorXd GaussianPolicy::mean(const Observation& observation) const {
  check_observation(observation.size());
  return network_.forward(observation);
}

namespace {

double gaussian_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const Eigen::VectorXd& log_std) {
  const Eigen::ArrayXd z = (x - mu).array() / log_std.array().exp();
  return (-0.5 * z.square() - log_std.array() - kHalfLog2Pi).sum();
}

}  // namespace

PolicySample GaussianPolicy::sample(const Observation& observation, Rng& rng) const {
  const Eigen::VectorXd mu = mean(observation);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd action(mu.size());
  for (Eigen::Index d = 0; d < mu.size(); ++d) action[d] = mu[d] + std::exp(log_std_[d]) * normal(rng);
  const double log_prob = gaussian_log_density(action, mu, log_std_);
  return {action, log_prob, Eigen::VectorXd()};
}

LogProbEntropy GaussianPolicy::log_prob_and_entropy(const Observation& observation,
                                                    const Eigen::VectorXd& action) const {
  if (action.size() != action_dim()) throw ArgumentError("action dimension does not match policy");
  const Eigen::VectorXd mu = mean(observation);
  return {gaussian_log_density(action, mu, log_std_), (log_std_.array() + kHalfLog2PiE).sum()};
}

PolicyBatchEval GaussianPolicy::evaluate(const Eigen::MatrixXd& observations, std::span<const Action> actions,
                                         Rng* perturbation) const {
  check_observation(observations.rows());
  if (static_cast<Eigen::Index>(actions.size()) != observations.cols()) {
    throw ArgumentError("observation and action batch sizes differ");
  }
  PolicyBatchEval eval;
  eval.cache = network_.forward_cached(observations);
  eval.distribution = eval.cache.output();
  if (perturbation != nullptr && rpo_alpha_ > 0.0) {
    std::uniform_real_distribution<double> noise(-rpo_alpha_, rpo_alpha_);
    for (Eigen::Index i = 0; i < eval.distribution.cols(); ++i) {
      for (Eigen::Index d = 0; d < eval.distribution.rows(); ++d) eval.distribution(d, i) += noise(*perturbation);
    }
  }
  const Eigen::Index n = observations.cols();
  const double entropy = (log_std_.array() + kHalfLog2PiE).sum();
  eval.log_probs.resize(n);
  eval.entropies = Eigen::VectorXd::Constant(n, entropy);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& a = std::get<Eigen::VectorXd>(actions[static_cast<std::size_t>(i)]);
    if (a.size() != action_dim()) throw ArgumentError("action dimension does not match policy");
    eval.log_probs[i] = gaussian_log_density(a, eval.distribution.col(i), log_std_);
  }
  return eval;
}

PolicyGradient GaussianPolicy::backward(const PolicyBatchEval& eval, std::span<const Action> actions,
                                        const Eigen::VectorXd& dlogp, const Eigen::VectorXd& dentropy) const {
  const Eigen::ArrayXd inv_var = (-2.0 * log_std_.array()).exp();
  const Eigen::ArrayXd inv_std = (-log_std_.array()).exp();
  Eigen::MatrixXd dmean(eval.distribution.rows(), eval.distribution.cols());
  Eigen::VectorXd dlog_std = Eigen::VectorXd::Zero(log_std_.size());
  for (Eigen::Index i = 0; i < dmean.cols(); ++i) {
    const auto& a = std::get<Eigen::VectorXd>(actions[static_cast<std::size_t>(i)]);
    const Eigen::ArrayXd diff = (a - eval.distribution.col(i)).array();
    dmean.col(i) = (dlogp[i] * diff * inv_var).matrix();
    dlog_std.array() += dlogp[i] * ((diff * inv_std).square() - 1.0) + dentropy[i];
  }
  return {network_.backward_batch(eval.cache, dmean), dlog_std};
}

// --- dispatch -----------------------------------------------------------------

Policy Policy::for_space(int observation_dim, const ActionSpace& space, double rpo_alpha, Rng& rng) {
  if (space.is_discrete()) return CategoricalPolicy::initialized(observation_dim, space.count, rng);
  return GaussianPolicy::initialized(observation_dim, space.dim(), rpo_alpha, rng);
}

int Policy::observation_dim() const {
  return std::visit([](const auto& p) { return p.observation_dim(); }, impl_);
}

PolicySample Policy::sample(const Observation& observation, Rng& rng) const {
  return std::visit([&](const auto& p) { return p.sample(observation, rng); }, impl_);
}

LogProbEntropy Policy::log_prob_and_entropy(const Observation& observation, const Action& action) const {
  if (is_categorical()) {
    const int* index = std::get_if<int>(&action);
    if (index == nullptr) throw ArgumentError("categorical policy expects an integer action");
    return categorical().log_prob_and_entropy(observation, *index);
  }
  const auto* vec = std::get_if<Eigen::VectorXd>(&action);
  if (vec == nullptr) throw ArgumentError("gaussian policy expects a vector action");
  return gaussian().log_prob_and_entropy(observation, *vec);
}

PolicyBatchEval Policy::evaluate(const Eigen::MatrixXd& observations, std::span<const Action> actions,
                                 Rng* perturbation) const {
  if (is_categorical()) return categorical().evaluate(observations, actions);
  return gaussian().evaluate(observations, actions, perturbation);
}

PolicyGradient Policy::backward(const PolicyBatchEval& eval, std::span<const Action> actions,
                                const Eigen::VectorXd& dlogp, const Eigen::VectorXd& dentropy) const {
  return std::visit([&](const auto& p) { return p.backward(eval, actions, dlogp, dentropy); }, impl_);
}

PolicyOptimizer Policy::make_optimizer(AdamConfig config) const {
  if (is_categorical()) return {AdamState::for_model(categorical().network(), config), AdamState()};
  return {AdamState::for_model(gaussian().network(), config),
          AdamState(static_cast<std::size_t>(gaussian().log_std().size()), config)};
}

void Policy::apply(const PolicyGradient& grads, PolicyOptimizer& optimizer) {
  if (is_categorical()) {
    adam_update(categorical().network(), optimizer.network, grads.network);
    return;
  }
  if (!grads.log_std.allFinite()) throw NumericError("adam_update: non-finite gradient");
  adam_update(gaussian().network(), optimizer.network, grads.network);
  adam_update(gaussian().log_std(), optimizer.log_std, grads.log_std);
}

}  // namespace rrl
