#include "rrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rrl/error.hpp"

namespace rrl {

ActionSpace ActionSpace::discrete(int count) {
  if (count < 2) throw ArgumentError("discrete action space needs at least 2 actions");
  ActionSpace space;
  space.kind = Kind::discrete;
  space.count = count;
  return space;
}

ActionSpace ActionSpace::continuous(Eigen::VectorXd low, Eigen::VectorXd high) {
  if (low.size() == 0 || low.size() != high.size()) {
    throw ArgumentError("continuous action bounds must be non-empty and equal length");
  }
  for (Eigen::Index i = 0; i < low.size(); ++i) {
    if (!(low[i] < high[i])) throw ArgumentError("continuous action bound low >= high");
  }
  ActionSpace space;
  space.kind = Kind::continuous;
  space.low = std::move(low);
  space.high = std::move(high);
  return space;
}

std::string to_string(EnvId id) {
  switch (id) {
    case EnvId::chain: return "chain";
    case EnvId::windy_grid: return "windy-grid";
    case EnvId::goal_world: return "goal-world";
  }
  return "?";
}

std::string to_string(RewardVariant variant) {
  return variant == RewardVariant::reach ? "reach" : "reach-fast";
}

EnvId parse_env_id(const std::string& text) {
  if (text == "chain") return EnvId::chain;
  if (text == "windy-grid") return EnvId::windy_grid;
  if (text == "goal-world") return EnvId::goal_world;
  throw ConfigError("unknown env_id '" + text + "'");
}

RewardVariant parse_reward_variant(const std::string& text) {
  if (text == "reach") return RewardVariant::reach;
  if (text == "reach-fast") return RewardVariant::reach_fast;
  throw ConfigError("unknown reward_variant '" + text + "'");
}

void EnvConfig::validate() const {
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (!(wind_strength >= 0.0 && wind_strength <= 1.0)) {
    throw ConfigError("wind_strength must lie in [0,1]");
  }
}

EnvConfig default_env_config(EnvId id) {
  EnvConfig config;
  config.env_id = id;
  switch (id) {
    case EnvId::chain: config.horizon = 20; break;
    case EnvId::windy_grid: config.horizon = 50; break;
    case EnvId::goal_world: config.horizon = 100; break;
  }
  return config;
}

// ---------------------------------------------------------------------------

Environment::Environment(EnvConfig config) : config_(std::move(config)), rng_(config_.seed) {
  config_.validate();
}

Observation Environment::reset(std::uint64_t seed) {
  rng_.seed(seed);
  return reset();
}

Observation Environment::reset() {
  active_ = true;
  elapsed_ = 0;
  return begin_episode();
}

StepResult Environment::step(const Action& action) {
  if (!active_) throw StateError("step called without an active episode; call reset first");
  const ActionSpace& space = action_space();
  if (space.is_discrete()) {
    const int* index = std::get_if<int>(&action);
    if (index == nullptr) throw ArgumentError("discrete environment expects an integer action");
    if (*index < 0 || *index >= space.count) {
      throw ArgumentError("discrete action " + std::to_string(*index) + " out of range");
    }
  } else {
    const auto* vec = std::get_if<Eigen::VectorXd>(&action);
    if (vec == nullptr) throw ArgumentError("continuous environment expects a vector action");
    if (vec->size() != space.low.size()) throw ArgumentError("continuous action has wrong dimension");
    if (!vec->allFinite()) throw ArgumentError("continuous action is not finite");
  }

  Transition transition = advance(action);
  ++elapsed_;
  StepResult result;
  result.observation = std::move(transition.observation);
  result.reward = transition.reward;
  result.terminated = transition.terminated;
  result.truncated = !transition.terminated && elapsed_ >= config_.horizon;
  if (result.terminated || result.truncated) active_ = false;
  return result;
}

std::unique_ptr<Environment> make_environment(const EnvConfig& config) {
  switch (config.env_id) {
    case EnvId::chain: return std::make_unique<ChainEnv>(config);
    case EnvId::windy_grid: return std::make_unique<WindyGridEnv>(config);
    case EnvId::goal_world: return std::make_unique<GoalWorldEnv>(config);
  }
  throw ConfigError("unknown env_id");
}

// --- chain ------------------------------------------------------------------

ChainEnv::ChainEnv(EnvConfig config) : Environment(std::move(config)), space_(ActionSpace::discrete(2)) {}

Observation ChainEnv::observe(int state) {
  Observation obs(1);
  obs[0] = static_cast<double>(state) / (kLength - 1);
  return obs;
}

Observation ChainEnv::begin_episode() {
  state_ = 0;
  return observe(state_);
}

Environment::Transition ChainEnv::advance(const Action& action) {
  const int a = std::get<int>(action);
  state_ = std::clamp(state_ + (a == 1 ? 1 : -1), 0, kLength - 1);
  Transition t;
  t.terminated = state_ == kLength - 1;
  t.reward = t.terminated ? 1.0 : 0.0;
  t.observation = observe(state_);
  return t;
}

// --- windy grid ---------------------------------------------------------------

WindyGridEnv::WindyGridEnv(EnvConfig config)
    : Environment(std::move(config)), space_(ActionSpace::discrete(4)) {}

Observation WindyGridEnv::observe(int x, int y) {
  Observation obs(2);
  obs[0] = static_cast<double>(x) / (kSize - 1);
  obs[1] = static_cast<double>(y) / (kSize - 1);
  return obs;
}

std::pair<int, int> WindyGridEnv::move(int x, int y, int action) {
  static constexpr int dx[4] = {1, -1, 0, 0};
  static constexpr int dy[4] = {0, 0, 1, -1};
  return {std::clamp(x + dx[action], 0, kSize - 1), std::clamp(y + dy[action], 0, kSize - 1)};
}

Observation WindyGridEnv::begin_episode() {
  x_ = 0;
  y_ = 0;
  return observe(x_, y_);
}

Environment::Transition WindyGridEnv::advance(const Action& action) {
  std::tie(x_, y_) = move(x_, y_, std::get<int>(action));
  const double strength = config().wind_enabled ? config().wind_strength : 0.0;
  // No draw at zero strength keeps the stream identical to the windless env.
  if (strength > 0.0 && uniform01(rng()) < strength) x_ = std::min(x_ + 1, kSize - 1);
  Transition t;
  t.terminated = x_ == kSize - 1 && y_ == kSize - 1;
  t.reward = -kStepCost + (t.terminated ? 1.0 : 0.0);
  t.observation = observe(x_, y_);
  return t;
}

// --- goal world ---------------------------------------------------------------

namespace {

ActionSpace goal_world_space(bool continuous) {
  if (!continuous) return ActionSpace::discrete(4);
  return ActionSpace::continuous(Eigen::VectorXd::Constant(2, -1.0), Eigen::VectorXd::Constant(2, 1.0));
}

}  // namespace

GoalWorldEnv::GoalWorldEnv(EnvConfig config)
    : Environment(std::move(config)), space_(goal_world_space(this->config().continuous_actions)) {}

Observation GoalWorldEnv::observe() const {
  Observation obs(4);
  obs << position_.x(), position_.y(), 0.5 * (velocity_.x() / kMaxSpeed + 1.0),
      0.5 * (velocity_.y() / kMaxSpeed + 1.0);
  return obs;
}

Observation GoalWorldEnv::begin_episode() {
  const Eigen::Vector2d goal(kGoalX, kGoalY);
  do {
    position_.x() = uniform01(rng());
    position_.y() = uniform01(rng());
  } while ((position_ - goal).norm() < kMinStartDistance);
  velocity_.setZero();
  return observe();
}

Environment::Transition GoalWorldEnv::advance(const Action& action) {
  Eigen::Vector2d accel;
  if (const int* index = std::get_if<int>(&action)) {
    static constexpr double ax[4] = {1, -1, 0, 0};
    static constexpr double ay[4] = {0, 0, 1, -1};
    accel << ax[*index], ay[*index];
  } else {
    accel = std::get<Eigen::VectorXd>(action).cwiseMax(-1.0).cwiseMin(1.0);
  }

  const Eigen::Vector2d goal(kGoalX, kGoalY);
  const Eigen::Vector2d to_goal = goal - position_;

  velocity_ = (kDamping * velocity_ + kAccel * accel).cwiseMax(-kMaxSpeed).cwiseMin(kMaxSpeed);
  position_ += velocity_;
  for (int i = 0; i < 2; ++i) {
    if (position_[i] < 0.0 || position_[i] > 1.0) {
      position_[i] = std::clamp(position_[i], 0.0, 1.0);
      velocity_[i] = 0.0;
    }
  }

  Transition t;
  t.terminated = (position_ - goal).norm() < kGoalRadius;
  t.reward = t.terminated ? 1.0 : 0.0;
  if (config().reward_variant == RewardVariant::reach_fast) {
    const double dist = to_goal.norm();
    const double toward = dist > 0.0 ? (velocity_ / kMaxSpeed).dot(to_goal / dist) : 0.0;
    t.reward += kShapingScale * std::max(0.0, toward) - kLivingCost;
  }
  t.observation = observe();
  return t;
}

// --- tabular ------------------------------------------------------------------

TabularModel::TabularModel(int states, int actions, int horizon_steps)
    : state_count(states),
      action_count(actions),
      transition(static_cast<std::size_t>(states) * actions * states, 0.0),
      reward(static_cast<std::size_t>(states) * actions, 0.0),
      initial_distribution(states, 0.0),
      terminal(states, false),
      horizon(horizon_steps) {}

void TabularModel::validate() const {
  if (state_count < 1 || action_count < 1) throw ArgumentError("empty tabular model");
  for (int s = 0; s < state_count; ++s) {
    for (int a = 0; a < action_count; ++a) {
      double total = 0.0;
      for (int next = 0; next < state_count; ++next) {
        const double value = p(s, a, next);
        if (value < 0.0) throw NumericError("negative transition probability");
        total += value;
      }
      if (std::abs(total - 1.0) > 1e-12) throw NumericError("transition row does not sum to 1");
    }
  }
  const double init = std::accumulate(initial_distribution.begin(), initial_distribution.end(), 0.0);
  if (std::abs(init - 1.0) > 1e-12) throw NumericError("initial distribution does not sum to 1");
}

TabularModel as_tabular(const EnvConfig& config) {
  config.validate();
  switch (config.env_id) {
    case EnvId::chain: {
      constexpr int n = ChainEnv::kLength;
      TabularModel model(n, 2, config.horizon);
      model.initial_distribution[0] = 1.0;
      model.terminal[n - 1] = true;
      for (int s = 0; s < n; ++s) {
        for (int a = 0; a < 2; ++a) {
          if (s == n - 1) {
            model.p(s, a, s) = 1.0;
            continue;
          }
          const int next = std::clamp(s + (a == 1 ? 1 : -1), 0, n - 1);
          model.p(s, a, next) = 1.0;
          model.r(s, a) = next == n - 1 ? 1.0 : 0.0;
        }
      }
      return model;
    }
    case EnvId::windy_grid: {
      constexpr int size = WindyGridEnv::kSize;
      const int goal = WindyGridEnv::state_index(size - 1, size - 1);
      const double wind = config.wind_enabled ? config.wind_strength : 0.0;
      TabularModel model(size * size, 4, config.horizon);
      model.initial_distribution[WindyGridEnv::state_index(0, 0)] = 1.0;
      model.terminal[goal] = true;
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const int s = WindyGridEnv::state_index(x, y);
          for (int a = 0; a < 4; ++a) {
            if (s == goal) {
              model.p(s, a, s) = 1.0;
              continue;
            }
            const auto [mx, my] = WindyGridEnv::move(x, y, a);
            const int calm = WindyGridEnv::state_index(mx, my);
            const int blown = WindyGridEnv::state_index(std::min(mx + 1, size - 1), my);
            model.p(s, a, calm) += 1.0 - wind;
            model.p(s, a, blown) += wind;
            model.r(s, a) = -WindyGridEnv::kStepCost + model.p(s, a, goal);
          }
        }
      }
      return model;
    }
    case EnvId::goal_world:
      throw UnsupportedError("goal-world has a continuous state space and cannot be tabularized");
  }
  throw ConfigError("unknown env_id");
}

int tabular_state(const EnvConfig& config, const Observation& observation) {
  switch (config.env_id) {
    case EnvId::chain:
      return static_cast<int>(std::lround(observation[0] * (ChainEnv::kLength - 1)));
    case EnvId::windy_grid: {
      const int x = static_cast<int>(std::lround(observation[0] * (WindyGridEnv::kSize - 1)));
      const int y = static_cast<int>(std::lround(observation[1] * (WindyGridEnv::kSize - 1)));
      return WindyGridEnv::state_index(x, y);
    }
    case EnvId::goal_world: break;
  }
  throw UnsupportedError("environment has no tabular state indexing");
}

Observation tabular_observation(const EnvConfig& config, int state) {
  switch (config.env_id) {
    case EnvId::chain: return ChainEnv::observe(state);
    case EnvId::windy_grid:
      return WindyGridEnv::observe(state % WindyGridEnv::kSize, state / WindyGridEnv::kSize);
    case EnvId::goal_world: break;
  }
  throw UnsupportedError("environment has no tabular state indexing");
}

}  // namespace rrl
