#include "rrl/pg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rrl/error.hpp"

namespace rrl {

void TrainConfig::validate() const {
  if (total_timesteps < 1) throw ConfigError("total_timesteps must be positive");
  if (num_envs < 1) throw ConfigError("num_envs must be positive");
  if (steps_per_rollout < num_envs || steps_per_rollout % num_envs != 0) {
    throw ConfigError("steps_per_rollout must be a positive multiple of num_envs");
  }
  if (minibatch_size < 1 || steps_per_rollout % minibatch_size != 0) {
    throw ConfigError("minibatch_size must divide steps_per_rollout");
  }
  if (update_epochs < 1) throw ConfigError("update_epochs must be positive");
  if (!(clip_coefficient > 0.0)) throw ConfigError("clip_coefficient must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0,1]");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(max_grad_norm > 0.0)) throw ConfigError("max_grad_norm must be positive");
  if (!(rpo_alpha >= 0.0)) throw ConfigError("rpo_alpha must be non-negative");
  if (gae_lambda && !(*gae_lambda >= 0.0 && *gae_lambda <= 1.0)) throw ConfigError("gae_lambda must lie in [0,1]");
}

// --- rollout ------------------------------------------------------------------

RolloutWorker::RolloutWorker(const EnvConfig& config, std::uint64_t env_seed, std::uint64_t rng_seed)
    : env_(make_environment(config)), rng_(rng_seed) {
  observation_ = env_->reset(env_seed);
}

RolloutBatch collect_rollout(std::span<RolloutWorker> workers, const Policy& policy, int steps_per_worker) {
  if (workers.empty() || steps_per_worker < 1) throw ArgumentError("collect_rollout needs workers and steps");
  RolloutBatch batch;
  for (RolloutWorker& worker : workers) {
    if (worker.observation_.size() != policy.observation_dim()) {
      throw ArgumentError("policy input does not match environment observations");
    }
    Trajectory current;
    for (int step = 0; step < steps_per_worker; ++step) {
      PolicySample sample = policy.sample(worker.observation_, worker.rng_);
      StepResult result = worker.env_->step(sample.action);
      current.observations.push_back(worker.observation_);
      current.actions.push_back(std::move(sample.action));
      current.rewards.push_back(result.reward);
      current.log_probs.push_back(sample.log_prob);
      if (policy.is_categorical()) current.action_probabilities.push_back(std::move(sample.probabilities));
      worker.episode_return_ += result.reward;

      if (result.terminated || result.truncated) {
        current.terminated = result.terminated;
        current.final_observation = std::move(result.observation);
        batch.trajectories.push_back(std::move(current));
        current = Trajectory();
        batch.episode_returns.push_back(worker.episode_return_);
        worker.episode_return_ = 0.0;
        worker.observation_ = worker.env_->reset();
      } else {
        worker.observation_ = std::move(result.observation);
      }
    }
    if (current.length() > 0) {
      current.final_observation = worker.observation_;
      batch.trajectories.push_back(std::move(current));
    }
  }

  const long n = static_cast<long>(workers.size()) * steps_per_worker;
  batch.total_steps = n;
  batch.observations.resize(policy.observation_dim(), n);
  batch.log_probs.resize(n);
  if (policy.is_categorical()) batch.action_probabilities.resize(policy.categorical().action_count(), n);
  batch.actions.reserve(static_cast<std::size_t>(n));
  long i = 0;
  for (const Trajectory& trajectory : batch.trajectories) {
    for (std::size_t t = 0; t < trajectory.length(); ++t, ++i) {
      batch.observations.col(i) = trajectory.observations[t];
      batch.actions.push_back(trajectory.actions[t]);
      batch.log_probs[i] = trajectory.log_probs[t];
      if (policy.is_categorical()) batch.action_probabilities.col(i) = trajectory.action_probabilities[t];
    }
  }
  return batch;
}

RolloutBatch collect_rollout(RolloutWorker& worker, const Policy& policy, int steps) {
  return collect_rollout(std::span<RolloutWorker>(&worker, 1), policy, steps);
}

std::vector<double> compute_returns(const Trajectory& trajectory, double gamma, double bootstrap_value) {
  std::vector<double> returns(trajectory.length());
  double running = trajectory.terminated ? 0.0 : bootstrap_value;
  for (std::size_t t = trajectory.length(); t-- > 0;) {
    running = trajectory.rewards[t] + gamma * running;
    returns[t] = running;
  }
  return returns;
}

void compute_batch_returns(RolloutBatch& batch, double gamma, const MlpModel& value_net) {
  batch.returns_to_go.resize(batch.total_steps);
  long i = 0;
  for (const Trajectory& trajectory : batch.trajectories) {
    const double bootstrap = trajectory.terminated ? 0.0 : value_net.forward(trajectory.final_observation)[0];
    for (double g : compute_returns(trajectory, gamma, bootstrap)) batch.returns_to_go[i++] = g;
  }
}

void compute_advantages(RolloutBatch& batch, const BaselineSpec& spec, const MlpModel& current_value, long timestep,
                        const TrainConfig& config) {
  if (batch.returns_to_go.size() != batch.total_steps) throw StateError("returns must be computed first");
  batch.baselines = combined_baselines(spec, current_value, batch.observations, batch.action_probabilities, timestep);

  if (config.gae_lambda) {
    // delta_t = r_t + gamma b(s_{t+1}) - b(s_t), accumulated with gamma*lambda.
    const double lambda = *config.gae_lambda;
    batch.advantages.resize(batch.total_steps);
    long offset = 0;
    for (const Trajectory& trajectory : batch.trajectories) {
      const long len = static_cast<long>(trajectory.length());
      double next_value = 0.0;
      if (!trajectory.terminated) {
        Eigen::MatrixXd last = trajectory.final_observation;
        Eigen::MatrixXd probs;
        if (batch.action_probabilities.size() > 0) probs = batch.action_probabilities.col(offset + len - 1);
        next_value = combined_baselines(spec, current_value, last, probs, timestep)[0];
      }
      double running = 0.0;
      for (long t = len - 1; t >= 0; --t) {
        const double value = batch.baselines[offset + t];
        const double delta = trajectory.rewards[t] + config.gamma * next_value - value;
        running = delta + config.gamma * lambda * running;
        batch.advantages[offset + t] = running;
        next_value = value;
      }
      offset += len;
    }
    // Value targets become the lambda-returns in this mode.
    batch.returns_to_go = batch.advantages + batch.baselines;
  } else {
    batch.advantages = batch.returns_to_go - batch.baselines;
  }

  batch.policy_advantages = batch.advantages;
  if (config.advantage_normalization && batch.total_steps > 1) {
    const double mean = batch.advantages.mean();
    const double var = (batch.advantages.array() - mean).square().sum() / static_cast<double>(batch.total_steps - 1);
    batch.policy_advantages = (batch.advantages.array() - mean) / (std::sqrt(var) + 1e-8);
  }
}

// --- update -------------------------------------------------------------------

SurrogateTerm clipped_surrogate(double ratio, double advantage, double clip_coefficient) {
  const double unclipped = ratio * advantage;
  const double clipped = std::clamp(ratio, 1.0 - clip_coefficient, 1.0 + clip_coefficient) * advantage;
  if (unclipped <= clipped) return {unclipped, false};
  return {clipped, true};
}

UpdateDiagnostics ppo_update(Policy& policy_in, MlpModel& value_in, const RolloutBatch& batch,
                             const TrainConfig& config, PolicyOptimizer& policy_opt_in, AdamState& value_opt_in,
                             Rng& rng) {
  if (batch.policy_advantages.size() != batch.total_steps || batch.returns_to_go.size() != batch.total_steps) {
    throw StateError("advantages must be computed before ppo_update");
  }
  const long n = batch.total_steps;
  const int mb = std::min<long>(config.minibatch_size, n);

  // Work on copies so a numeric failure leaves the caller's state intact.
  Policy policy = policy_in;
  MlpModel value_net = value_in;
  PolicyOptimizer policy_opt = policy_opt_in;
  AdamState value_opt = value_opt_in;

  UpdateDiagnostics diag;
  long minibatches = 0;
  long samples_seen = 0;
  std::vector<long> order(n);
  std::iota(order.begin(), order.end(), 0L);
  const bool perturb = !policy.is_categorical() && policy.gaussian().rpo_alpha() > 0.0;

  for (int epoch = 0; epoch < config.update_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (long start = 0; start < n; start += mb) {
      const long m = std::min<long>(mb, n - start);
      Eigen::MatrixXd obs(batch.observations.rows(), m);
      std::vector<Action> actions;
      actions.reserve(static_cast<std::size_t>(m));
      Eigen::VectorXd old_log_probs(m), adv(m), returns(m);
      for (long j = 0; j < m; ++j) {
        const long idx = order[start + j];
        obs.col(j) = batch.observations.col(idx);
        actions.push_back(batch.actions[idx]);
        old_log_probs[j] = batch.log_probs[idx];
        adv[j] = batch.policy_advantages[idx];
        returns[j] = batch.returns_to_go[idx];
      }

      const PolicyBatchEval eval = policy.evaluate(obs, actions, perturb ? &rng : nullptr);
      const ForwardCache value_cache = value_net.forward_cached(obs);
      const Eigen::VectorXd values = value_cache.output().row(0).transpose();

      const double inv_m = 1.0 / static_cast<double>(m);
      Eigen::VectorXd dlogp(m);
      const Eigen::VectorXd dentropy = Eigen::VectorXd::Constant(m, -config.entropy_coefficient * inv_m);
      double surrogate = 0.0, kl = 0.0, clip_count = 0.0, max_dev = 0.0;
      for (long j = 0; j < m; ++j) {
        const double log_ratio = eval.log_probs[j] - old_log_probs[j];
        const double ratio = std::exp(log_ratio);
        const SurrogateTerm term = clipped_surrogate(ratio, adv[j], config.clip_coefficient);
        surrogate += term.value;
        dlogp[j] = term.clipped ? 0.0 : -adv[j] * ratio * inv_m;
        kl += (ratio - 1.0) - log_ratio;
        if (std::abs(ratio - 1.0) > config.clip_coefficient) clip_count += 1.0;
        max_dev = std::max(max_dev, std::abs(ratio - 1.0));
      }
      const double policy_loss = -surrogate * inv_m;
      const double entropy = eval.entropies.mean();
      const Eigen::VectorXd value_error = values - returns;
      const double value_loss = 0.5 * value_error.squaredNorm() * inv_m;
      const double loss = policy_loss - config.entropy_coefficient * entropy + config.value_coefficient * value_loss;
      if (!std::isfinite(loss)) throw NumericError("non-finite PPO loss; update aborted");

      PolicyGradient policy_grad = policy.backward(eval, actions, dlogp, dentropy);
      const Eigen::MatrixXd dvalue = (config.value_coefficient * inv_m * value_error).transpose();
      GradientBuffer value_grad = value_net.backward_batch(value_cache, dvalue);

      const double norm = std::sqrt(policy_grad.squared_norm() + value_grad.squared_norm());
      if (!std::isfinite(norm)) throw NumericError("non-finite PPO gradient; update aborted");
      if (norm > config.max_grad_norm) {
        const double scale = config.max_grad_norm / (norm + 1e-6);
        policy_grad *= scale;
        value_grad *= scale;
      }
      policy.apply(policy_grad, policy_opt);
      adam_update(value_net, value_opt, value_grad);

      if (minibatches == 0) diag.first_minibatch_ratio_deviation = max_dev;
      diag.policy_loss += policy_loss;
      diag.value_loss += value_loss;
      diag.entropy += entropy;
      diag.approx_kl += kl * inv_m;
      diag.clip_fraction += clip_count;
      samples_seen += m;
      ++minibatches;
    }
  }
  diag.policy_loss /= static_cast<double>(minibatches);
  diag.value_loss /= static_cast<double>(minibatches);
  diag.entropy /= static_cast<double>(minibatches);
  diag.approx_kl /= static_cast<double>(minibatches);
  diag.clip_fraction /= static_cast<double>(samples_seen);

  policy_in = std::move(policy);
  value_in = std::move(value_net);
  policy_opt_in = std::move(policy_opt);
  value_opt_in = std::move(value_opt);
  return diag;
}

// --- training loop ------------------------------------------------------------

namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kWorkerStream = 1;
constexpr std::uint64_t kUpdateStream = 2;
constexpr std::uint64_t kEnvStream = 3;

}  // namespace

TrainResult train(const EnvConfig& env_config, const TrainConfig& config, const BaselineSpec& baseline,
                  std::uint64_t seed, const std::function<void(const TrainRow&)>& on_row) {
  config.validate();
  env_config.validate();
  if (baseline.prior) baseline.schedule.validate();

  std::vector<RolloutWorker> workers;
  workers.reserve(config.num_envs);
  const std::uint64_t env_base = derive_seed(seed, kEnvStream);
  const std::uint64_t worker_base = derive_seed(seed, kWorkerStream);
  for (int i = 0; i < config.num_envs; ++i) {
    workers.emplace_back(env_config, env_base + static_cast<std::uint64_t>(i),
                         worker_base + static_cast<std::uint64_t>(i));
  }
  const Environment& probe = workers.front().env();
  const ActionSpace& space = probe.action_space();
  const int obs_dim = probe.observation_dim();

  if (baseline.prior) {
    PriorRequirements requirements;
    requirements.obs_dim = obs_dim;
    requirements.continuous_actions = !space.is_discrete();
    requirements.action_count = space.is_discrete() ? space.count : 0;
    check_compatible(*baseline.prior, requirements);
  }

  Rng init_rng(derive_seed(seed, kInitStream));
  Policy policy = Policy::for_space(obs_dim, space, config.rpo_alpha, init_rng);
  MlpModel value_net = make_value_network(obs_dim, init_rng);
  const AdamConfig adam{config.learning_rate};
  PolicyOptimizer policy_opt = policy.make_optimizer(adam);
  AdamState value_opt = AdamState::for_model(value_net, adam);
  Rng update_rng(derive_seed(seed, kUpdateStream));

  TrainResult result{{}, policy, value_net};
  const long updates = config.total_timesteps / config.steps_per_rollout;
  long timestep = 0;
  for (long u = 0; u < updates; ++u) {
    RolloutBatch batch = collect_rollout(workers, policy, config.steps_per_env());
    batch.collection_timestep = timestep;
    compute_batch_returns(batch, config.gamma, value_net);
    compute_advantages(batch, baseline, value_net, timestep, config);
    const UpdateDiagnostics diag = ppo_update(policy, value_net, batch, config, policy_opt, value_opt, update_rng);

    TrainRow row;
    row.timestep = timestep;
    row.w_t = baseline.effective_weight(timestep);
    row.episodes = static_cast<int>(batch.episode_returns.size());
    if (batch.episode_returns.empty()) {
      row.episodic_return_mean = std::numeric_limits<double>::quiet_NaN();
      row.episodic_return_std = std::numeric_limits<double>::quiet_NaN();
    } else {
      const double count = static_cast<double>(batch.episode_returns.size());
      const double mean = std::accumulate(batch.episode_returns.begin(), batch.episode_returns.end(), 0.0) / count;
      double var = 0.0;
      for (double r : batch.episode_returns) var += (r - mean) * (r - mean);
      row.episodic_return_mean = mean;
      row.episodic_return_std = std::sqrt(var / count);
    }
    row.value_loss = diag.value_loss;
    row.policy_loss = diag.policy_loss;
    row.entropy = diag.entropy;
    row.approx_kl = diag.approx_kl;
    row.clip_fraction = diag.clip_fraction;
    result.curve.push_back(row);
    if (on_row) on_row(row);
    timestep += batch.total_steps;
  }
  result.policy = std::move(policy);
  result.value_network = std::move(value_net);
  return result;
}

}  // namespace rrl
