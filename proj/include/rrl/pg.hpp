#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "rrl/env.hpp"
#include "rrl/mlp.hpp"
#include "rrl/policy.hpp"
#include "rrl/reincarnation.hpp"

namespace rrl {

struct TrainConfig {
  long total_timesteps = 100000;
  int num_envs = 16;
  int steps_per_rollout = 2048;  // across all envs
  int minibatch_size = 256;
  int update_epochs = 4;
  double clip_coefficient = 0.2;
  double gamma = 0.99;
  double entropy_coefficient = 0.01;
  double value_coefficient = 0.5;
  double max_grad_norm = 0.5;
  bool advantage_normalization = true;
  double learning_rate = 2.5e-4;
  double rpo_alpha = 0.5;  // continuous action spaces only
  // Ablation only: GAE over the combined baseline instead of MC returns.
  std::optional<double> gae_lambda;

  int steps_per_env() const { return steps_per_rollout / num_envs; }
  void validate() const;
};

// One contiguous piece of an episode collected by a single worker. A
// trajectory cut by the rollout boundary or the horizon is not terminated and
// is bootstrapped from final_observation.
struct Trajectory {
  std::vector<Observation> observations;
  std::vector<Action> actions;
  std::vector<double> rewards;
  std::vector<double> log_probs;
  std::vector<Eigen::VectorXd> action_probabilities;  // categorical policies only
  bool terminated = false;
  Observation final_observation;

  std::size_t length() const { return rewards.size(); }
};

// Per-step arrays are flattened in worker order, then time order.
struct RolloutBatch {
  std::vector<Trajectory> trajectories;
  long total_steps = 0;
  long collection_timestep = 0;  // environment steps consumed before this rollout

  Eigen::MatrixXd observations;         // obs_dim x total_steps
  std::vector<Action> actions;
  Eigen::VectorXd log_probs;
  Eigen::MatrixXd action_probabilities;  // |A| x total_steps, empty for Gaussian policies

  Eigen::VectorXd returns_to_go;
  Eigen::VectorXd baselines;
  Eigen::VectorXd advantages;         // returns_to_go - baselines
  Eigen::VectorXd policy_advantages;  // advantages after optional normalization

  // Undiscounted returns of episodes that finished during this rollout.
  std::vector<double> episode_returns;
};

// Owns one environment instance, its random stream and the partially
// completed episode carried across rollouts.
class RolloutWorker {
 public:
  RolloutWorker(const EnvConfig& config, std::uint64_t env_seed, std::uint64_t rng_seed);

  Environment& env() { return *env_; }
  Rng& rng() { return rng_; }
  const Observation& observation() const { return observation_; }

 private:
  friend RolloutBatch collect_rollout(std::span<RolloutWorker> workers, const Policy& policy, int steps_per_worker);

  std::unique_ptr<Environment> env_;
  Rng rng_;
  Observation observation_;
  double episode_return_ = 0.0;
};

// Exactly workers.size() * steps_per_worker transitions; episodes reset
// automatically on termination or truncation.
RolloutBatch collect_rollout(std::span<RolloutWorker> workers, const Policy& policy, int steps_per_worker);
RolloutBatch collect_rollout(RolloutWorker& worker, const Policy& policy, int steps);

// G_t = sum_{k>=t} gamma^{k-t} r_k, with gamma * bootstrap_value appended
// after the last reward when the trajectory did not terminate.
std::vector<double> compute_returns(const Trajectory& trajectory, double gamma, double bootstrap_value = 0.0);
// Fills batch.returns_to_go, bootstrapping cut trajectories with value_net.
void compute_batch_returns(RolloutBatch& batch, double gamma, const MlpModel& value_net);

// Fills baselines with the combined baseline at weaning timestep t, then
// advantages = returns - baselines, then the normalized policy advantages.
void compute_advantages(RolloutBatch& batch, const BaselineSpec& spec, const MlpModel& current_value, long timestep,
                        const TrainConfig& config);

struct UpdateDiagnostics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  // max |ratio - 1| over the first minibatch of the first epoch
  double first_minibatch_ratio_deviation = 0.0;
};

// Clipped-surrogate surrogate for one sample; the gradient flows through
// the returned branch only.
struct SurrogateTerm {
  double value = 0.0;
  bool clipped = false;
};
SurrogateTerm clipped_surrogate(double ratio, double advantage, double clip_coefficient);

// Runs update_epochs passes over shuffled minibatches. On a non-finite loss
// throws NumericError and leaves policy, value_net and optimizers untouched.
UpdateDiagnostics ppo_update(Policy& policy, MlpModel& value_net, const RolloutBatch& batch,
                             const TrainConfig& config, PolicyOptimizer& policy_optimizer,
                             AdamState& value_optimizer, Rng& rng);

struct TrainRow {
  long timestep = 0;
  double episodic_return_mean = 0.0;  // NaN when no episode finished in the rollout
  double episodic_return_std = 0.0;
  double w_t = 0.0;
  double value_loss = 0.0;
  double policy_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  int episodes = 0;
};

struct TrainResult {
  std::vector<TrainRow> curve;
  Policy policy;
  MlpModel value_network;
};

// Deterministic given seed. Throws CompatibilityError (or UnsupportedError)
// before any environment step when the prior does not fit the target env.
TrainResult train(const EnvConfig& env_config, const TrainConfig& config, const BaselineSpec& baseline,
                  std::uint64_t seed, const std::function<void(const TrainRow&)>& on_row = {});

}  // namespace rrl
