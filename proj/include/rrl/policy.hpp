#pragma once

#include <Eigen/Dense>

#include <span>
#include <variant>
#include <vector>

#include "rrl/env.hpp"
#include "rrl/mlp.hpp"
#include "rrl/random.hpp"

namespace rrl {

inline constexpr int kHiddenUnits = 64;
inline constexpr double kPolicyOutputScale = 0.01;
inline constexpr double kValueOutputScale = 1.0;

// obs -> 64 -> 64 -> outputs, tanh hidden.
std::vector<int> standard_layer_dims(int input_dim, int output_dim);
MlpModel make_value_network(int observation_dim, Rng& rng);

struct PolicySample {
  Action action;
  double log_prob = 0.0;
  Eigen::VectorXd probabilities;  // categorical only
};

struct LogProbEntropy {
  double log_prob = 0.0;
  double entropy = 0.0;
};

// Per-sample log-probabilities and entropies for a batch, plus what the
// backward pass needs.
struct PolicyBatchEval {
  Eigen::VectorXd log_probs;
  Eigen::VectorXd entropies;
  ForwardCache cache;
  Eigen::MatrixXd distribution;  // categorical: probabilities; gaussian: evaluated means
};

struct PolicyGradient {
  GradientBuffer network;
  Eigen::VectorXd log_std;  // empty for categorical policies

  double squared_norm() const { return network.squared_norm() + log_std.squaredNorm(); }
  PolicyGradient& operator*=(double scale) {
    network *= scale;
    log_std *= scale;
    return *this;
  }
};

struct PolicyOptimizer {
  AdamState network;
  AdamState log_std;
};

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits);

class CategoricalPolicy {
 public:
  CategoricalPolicy() = default;
  explicit CategoricalPolicy(MlpModel network);
  static CategoricalPolicy initialized(int observation_dim, int action_count, Rng& rng);

  MlpModel& network() { return network_; }
  const MlpModel& network() const { return network_; }
  int observation_dim() const { return network_.input_dim(); }
  int action_count() const { return network_.output_dim(); }

  Eigen::VectorXd probabilities(const Observation& observation) const;
  PolicySample sample(const Observation& observation, Rng& rng) const;
  LogProbEntropy log_prob_and_entropy(const Observation& observation, int action) const;

  PolicyBatchEval evaluate(const Eigen::MatrixXd& observations, std::span<const Action> actions) const;
  // Gradient of sum_i (dlogp_i * log_prob_i + dentropy_i * entropy_i).
  PolicyGradient backward(const PolicyBatchEval& eval, std::span<const Action> actions,
                          const Eigen::VectorXd& dlogp, const Eigen::VectorXd& dentropy) const;

 private:
  void check_observation(Eigen::Index rows) const;

  MlpModel network_;
};

// Diagonal Gaussian with state-independent log_std. With rpo_alpha > 0 the
// mean is perturbed by U(-rpo_alpha, rpo_alpha) when a perturbation stream is
// passed to evaluate(); sampling always uses the unperturbed mean.
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(MlpModel network, Eigen::VectorXd log_std, double rpo_alpha);
  static GaussianPolicy initialized(int observation_dim, int action_dim, double rpo_alpha, Rng& rng);

  MlpModel& network() { return network_; }
  const MlpModel& network() const { return network_; }
  Eigen::VectorXd& log_std() { return log_std_; }
  const Eigen::VectorXd& log_std() const { return log_std_; }
  double rpo_alpha() const { return rpo_alpha_; }
  int observation_dim() const { return network_.input_dim(); }
  int action_dim() const { return network_.output_dim(); }

  Eigen::VectorXd mean(const Observation& observation) const;
  PolicySample sample(const Observation& observation, Rng& rng) const;
  LogProbEntropy log_prob_and_entropy(const Observation& observation, const Eigen::VectorXd& action) const;

  PolicyBatchEval evaluate(const Eigen::MatrixXd& observations, std::span<const Action> actions,
                           Rng* perturbation = nullptr) const;
  PolicyGradient backward(const PolicyBatchEval& eval, std::span<const Action> actions,
                          const Eigen::VectorXd& dlogp, const Eigen::VectorXd& dentropy) const;

 private:
  void check_observation(Eigen::Index rows) const;

  MlpModel network_;
  Eigen::VectorXd log_std_;
  double rpo_alpha_ = 0.0;
};

// Either policy kind behind one interface, as used by the trainer.
class Policy {
 public:
  Policy(CategoricalPolicy policy) : impl_(std::move(policy)) {}  // NOLINT
  Policy(GaussianPolicy policy) : impl_(std::move(policy)) {}     // NOLINT

  // Categorical for discrete spaces, Gaussian (with rpo_alpha) otherwise.
  static Policy for_space(int observation_dim, const ActionSpace& space, double rpo_alpha, Rng& rng);

  bool is_categorical() const { return std::holds_alternative<CategoricalPolicy>(impl_); }
  const CategoricalPolicy& categorical() const { return std::get<CategoricalPolicy>(impl_); }
  CategoricalPolicy& categorical() { return std::get<CategoricalPolicy>(impl_); }
  const GaussianPolicy& gaussian() const { return std::get<GaussianPolicy>(impl_); }
  GaussianPolicy& gaussian() { return std::get<GaussianPolicy>(impl_); }

  int observation_dim() const;
  PolicySample sample(const Observation& observation, Rng& rng) const;
  LogProbEntropy log_prob_and_entropy(const Observation& observation, const Action& action) const;
  PolicyBatchEval evaluate(const Eigen::MatrixXd& observations, std::span<const Action> actions,
                           Rng* perturbation = nullptr) const;
  PolicyGradient backward(const PolicyBatchEval& eval, std::span<const Action> actions,
                          const Eigen::VectorXd& dlogp, const Eigen::VectorXd& dentropy) const;

  PolicyOptimizer make_optimizer(AdamConfig config) const;
  void apply(const PolicyGradient& grads, PolicyOptimizer& optimizer);

 private:
  std::variant<CategoricalPolicy, GaussianPolicy> impl_;
};

}  // namespace rrl
