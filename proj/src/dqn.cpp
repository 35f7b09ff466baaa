#include "rrl/dqn.hpp"

#include <algorithm>
#include <random>
#include <unordered_set>

#include "rrl/error.hpp"
#include "rrl/policy.hpp"

namespace rrl {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
  entries_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(ReplayTransition transition) {
  if (entries_.size() < capacity_) {
    entries_.push_back(std::move(transition));
    return;
  }
  entries_[next_] = std::move(transition);
  next_ = (next_ + 1) % capacity_;
}

const ReplayTransition& ReplayBuffer::at(std::size_t i) const {
  if (i >= entries_.size()) throw ArgumentError("replay index out of range");
  return entries_[(next_ + i) % entries_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count, Rng& rng) const {
  const std::size_t n = entries_.size();
  if (count > n) throw ArgumentError("cannot sample more transitions than are stored");
  // Floyd's algorithm: exactly `count` draws, no rejection loop.
  std::vector<std::size_t> out;
  out.reserve(count);
  std::unordered_set<std::size_t> chosen;
  chosen.reserve(count * 2);
  for (std::size_t j = n - count; j < n; ++j) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    const std::size_t pick = chosen.insert(t).second ? t : j;
    if (pick == j) chosen.insert(j);
    out.push_back(pick);
  }
  return out;
}

void DqnConfig::validate() const {
  if (total_timesteps < 1) throw ConfigError("dqn total_timesteps must be positive");
  if (batch_size < 1) throw ConfigError("dqn batch_size must be positive");
  if (buffer_capacity < static_cast<std::size_t>(batch_size)) throw ConfigError("buffer smaller than a batch");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("dqn gamma must lie in (0,1]");
  if (target_update_interval < 1) throw ConfigError("target_update_interval must be positive");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0) || !(epsilon_end >= 0.0 && epsilon_end <= 1.0)) {
    throw ConfigError("epsilon must lie in [0,1]");
  }
  if (epsilon_end > epsilon_start) throw ConfigError("epsilon_end must not exceed epsilon_start");
  if (!(epsilon_decay_fraction >= 0.0 && epsilon_decay_fraction <= 1.0)) {
    throw ConfigError("epsilon_decay_fraction must lie in [0,1]");
  }
  if (learning_starts < 0) throw ConfigError("learning_starts must be non-negative");
  if (train_frequency < 1) throw ConfigError("train_frequency must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("dqn learning_rate must be positive");
}

double epsilon_at(const DqnConfig& config, long timestep) {
  const double horizon = config.epsilon_decay_fraction * static_cast<double>(config.total_timesteps);
  if (timestep <= 0) return config.epsilon_start;
  if (static_cast<double>(timestep) >= horizon) return config.epsilon_end;
  const double progress = static_cast<double>(timestep) / horizon;
  return config.epsilon_start + progress * (config.epsilon_end - config.epsilon_start);
}

int greedy_action(const MlpModel& q_network, const Observation& observation) {
  Eigen::Index best = 0;
  q_network.forward(observation).maxCoeff(&best);
  return static_cast<int>(best);
}

namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kBehaviourStream = 1;
constexpr std::uint64_t kReplayStream = 2;
constexpr std::uint64_t kEnvStream = 3;

void td_update(MlpModel& online, const MlpModel& target, AdamState& optimizer, const ReplayBuffer& buffer,
               const DqnConfig& config, Rng& rng) {
  const std::vector<std::size_t> picks = buffer.sample_indices(static_cast<std::size_t>(config.batch_size), rng);
  const long b = static_cast<long>(picks.size());
  const int obs_dim = online.input_dim();
  Eigen::MatrixXd obs(obs_dim, b), next(obs_dim, b);
  for (long j = 0; j < b; ++j) {
    const ReplayTransition& tr = buffer.at(picks[j]);
    obs.col(j) = tr.observation;
    next.col(j) = tr.next_observation;
  }
  const Eigen::MatrixXd next_q = target.forward_batch(next);
  const ForwardCache cache = online.forward_cached(obs);
  const Eigen::MatrixXd& q = cache.output();

  // Loss 0.5 * mean (Q(s,a) - y)^2; only the taken action's output gets gradient.
  Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(q.rows(), b);
  for (long j = 0; j < b; ++j) {
    const ReplayTransition& tr = buffer.at(picks[j]);
    const double bootstrap = tr.terminated ? 0.0 : next_q.col(j).maxCoeff();
    const double y = tr.reward + config.gamma * bootstrap;
    dq(tr.action, j) = (q(tr.action, j) - y) / static_cast<double>(b);
  }
  const GradientBuffer grads = online.backward_batch(cache, dq);
  adam_update(online, optimizer, grads);
}

}  // namespace

DqnResult dqn_train(const EnvConfig& env_config, const DqnConfig& config, std::uint64_t seed) {
  config.validate();
  env_config.validate();
  std::unique_ptr<Environment> env = make_environment(env_config);
  const ActionSpace& space = env->action_space();
  if (!space.is_discrete()) throw UnsupportedError("DQN requires a discrete action space");
  const int actions = space.count;

  Rng init_rng(derive_seed(seed, kInitStream));
  Rng behaviour_rng(derive_seed(seed, kBehaviourStream));
  Rng replay_rng(derive_seed(seed, kReplayStream));

  MlpModel online =
      MlpModel::initialized(standard_layer_dims(env->observation_dim(), actions), init_rng, kValueOutputScale);
  MlpModel target = online;
  AdamState optimizer = AdamState::for_model(online, AdamConfig{config.learning_rate});
  ReplayBuffer buffer(config.buffer_capacity);

  DqnResult result{online, {}};
  Observation obs = env->reset(derive_seed(seed, kEnvStream));
  double episode_return = 0.0;
  for (long t = 0; t < config.total_timesteps; ++t) {
    int action;
    if (uniform01(behaviour_rng) < epsilon_at(config, t)) {
      action = std::uniform_int_distribution<int>(0, actions - 1)(behaviour_rng);
    } else {
      action = greedy_action(online, obs);
    }
    StepResult step = env->step(action);
    episode_return += step.reward;
    buffer.push({obs, action, step.reward, step.observation, step.terminated});

    if (step.terminated || step.truncated) {
      result.curve.push_back({t + 1, episode_return});
      episode_return = 0.0;
      obs = env->reset();
    } else {
      obs = std::move(step.observation);
    }

    const long steps_taken = t + 1;
    if (steps_taken > config.learning_starts && steps_taken % config.train_frequency == 0 &&
        buffer.size() >= static_cast<std::size_t>(config.batch_size)) {
      td_update(online, target, optimizer, buffer, config, replay_rng);
    }
    if (steps_taken % config.target_update_interval == 0) target = online;
  }
  result.q_network = std::move(online);
  return result;
}

double greedy_return(const MlpModel& q_network, const EnvConfig& env_config, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw ArgumentError("greedy_return needs at least one episode");
  std::unique_ptr<Environment> env = make_environment(env_config);
  double total = 0.0;
  Observation obs = env->reset(seed);
  for (int e = 0; e < episodes; ++e) {
    if (e > 0) obs = env->reset();
    while (true) {
      StepResult step = env->step(greedy_action(q_network, obs));
      total += step.reward;
      if (step.terminated || step.truncated) break;
      obs = std::move(step.observation);
    }
  }
  return total / episodes;
}

PriorArtifact make_q_prior(const MlpModel& q_network, PriorMetadata metadata) {
  return PriorArtifact(PriorKind::q_function, q_network, std::move(metadata));
}

PriorArtifact export_prior(const MlpModel& q_network, PriorMetadata metadata, const std::filesystem::path& path) {
  if (metadata.source_algorithm.empty()) metadata.source_algorithm = "dqn";
  const PriorArtifact artifact = make_q_prior(q_network, std::move(metadata));
  save_prior(artifact, path);
  return load_prior(path);
}

}  // namespace rrl
