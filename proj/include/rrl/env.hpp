#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "rrl/random.hpp"

namespace rrl {

using Observation = Eigen::VectorXd;
// Discrete environments take an index, continuous ones a real vector.
using Action = std::variant<int, Eigen::VectorXd>;

struct ActionSpace {
  enum class Kind { discrete, continuous };

  Kind kind = Kind::discrete;
  int count = 0;
  Eigen::VectorXd low;
  Eigen::VectorXd high;

  static ActionSpace discrete(int count);
  static ActionSpace continuous(Eigen::VectorXd low, Eigen::VectorXd high);

  bool is_discrete() const { return kind == Kind::discrete; }
  // Number of logits for discrete spaces, vector length for continuous ones.
  int dim() const { return is_discrete() ? count : static_cast<int>(low.size()); }
};

enum class EnvId { chain, windy_grid, goal_world };
enum class RewardVariant { reach, reach_fast };

std::string to_string(EnvId id);
std::string to_string(RewardVariant variant);
EnvId parse_env_id(const std::string& text);
RewardVariant parse_reward_variant(const std::string& text);

struct EnvConfig {
  EnvId env_id = EnvId::chain;
  // windy-grid only
  bool wind_enabled = false;
  double wind_strength = 0.0;
  // goal-world only
  RewardVariant reward_variant = RewardVariant::reach;
  bool continuous_actions = false;
  int horizon = 20;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const EnvConfig&) const = default;
};

// Per-environment horizons used when a config does not override them.
EnvConfig default_env_config(EnvId id);

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
};

// Episode state machine shared by all environments: horizon truncation,
// terminal latching and action validation live here; subclasses only
// implement the dynamics.
class Environment {
 public:
  explicit Environment(EnvConfig config);
  virtual ~Environment() = default;

  Environment(const Environment&) = delete;
  Environment& operator=(const Environment&) = delete;

  const EnvConfig& config() const { return config_; }
  virtual const ActionSpace& action_space() const = 0;
  virtual int observation_dim() const = 0;

  // Reseeds the environment stream, then starts an episode.
  Observation reset(std::uint64_t seed);
  // Starts a new episode continuing the current random stream.
  Observation reset();
  StepResult step(const Action& action);

  bool episode_active() const { return active_; }
  int elapsed_steps() const { return elapsed_; }

 protected:
  struct Transition {
    Observation observation;
    double reward = 0.0;
    bool terminated = false;
  };

  virtual Observation begin_episode() = 0;
  virtual Transition advance(const Action& action) = 0;

  Rng& rng() { return rng_; }

 private:
  EnvConfig config_;
  Rng rng_;
  bool active_ = false;
  int elapsed_ = 0;
};

std::unique_ptr<Environment> make_environment(const EnvConfig& config);

// Linear chain: states 0..n-1, start at 0, actions {0: left, 1: right},
// reward 1 on entering the rightmost state, which terminates the episode.
class ChainEnv final : public Environment {
 public:
  static constexpr int kLength = 5;

  explicit ChainEnv(EnvConfig config);
  const ActionSpace& action_space() const override { return space_; }
  int observation_dim() const override { return 1; }

  static Observation observe(int state);

 protected:
  Observation begin_episode() override;
  Transition advance(const Action& action) override;

 private:
  ActionSpace space_;
  int state_ = 0;
};

// 5x5 grid, start (0,0), goal (4,4). Actions {0:+x, 1:-x, 2:+y, 3:-y}.
// With wind enabled, after the move the agent is pushed one cell along +x
// with probability wind_strength. Reward -0.01 per step, +1 on the goal.
class WindyGridEnv final : public Environment {
 public:
  static constexpr int kSize = 5;
  static constexpr double kStepCost = 0.01;

  explicit WindyGridEnv(EnvConfig config);
  const ActionSpace& action_space() const override { return space_; }
  int observation_dim() const override { return 2; }

  static Observation observe(int x, int y);
  static int state_index(int x, int y) { return y * kSize + x; }
  // Deterministic part of a move, clipped at the border.
  static std::pair<int, int> move(int x, int y, int action);

 protected:
  Observation begin_episode() override;
  Transition advance(const Action& action) override;

 private:
  ActionSpace space_;
  int x_ = 0;
  int y_ = 0;
};

// Damped 2-D point mass on the unit square with a fixed goal. Start positions
// are drawn uniformly at least kMinStartDistance away from the goal.
//   v <- clip(kDamping * v + kAccel * a, -kMaxSpeed, kMaxSpeed)
//   p <- clip(p + v, 0, 1)   (velocity component zeroed at a wall)
// reach:      +1 when |p - goal| < kGoalRadius (terminates).
// reach-fast: reach reward, plus 0.1 * max(0, (v / kMaxSpeed) . g_hat) and a
//             -0.01 living cost every step.
// Observations: (x, y, vx, vy) with velocities mapped into [0,1].
class GoalWorldEnv final : public Environment {
 public:
  static constexpr double kGoalX = 0.75;
  static constexpr double kGoalY = 0.75;
  static constexpr double kGoalRadius = 0.1;
  static constexpr double kMinStartDistance = 0.3;
  static constexpr double kDamping = 0.7;
  static constexpr double kAccel = 0.03;
  static constexpr double kMaxSpeed = 0.1;
  static constexpr double kShapingScale = 0.1;
  static constexpr double kLivingCost = 0.01;

  explicit GoalWorldEnv(EnvConfig config);
  const ActionSpace& action_space() const override { return space_; }
  int observation_dim() const override { return 4; }

 protected:
  Observation begin_episode() override;
  Transition advance(const Action& action) override;

 private:
  Observation observe() const;

  ActionSpace space_;
  Eigen::Vector2d position_ = Eigen::Vector2d::Zero();
  Eigen::Vector2d velocity_ = Eigen::Vector2d::Zero();
};

// Explicit finite MDP. Terminal states are absorbing with zero reward; the
// oracles hold their value at zero.
struct TabularModel {
  int state_count = 0;
  int action_count = 0;
  std::vector<double> transition;  // [s][a][s'] flattened
  std::vector<double> reward;      // [s][a] flattened, expected reward
  std::vector<double> initial_distribution;
  std::vector<bool> terminal;
  int horizon = 1;

  TabularModel() = default;
  TabularModel(int states, int actions, int horizon);

  double& p(int s, int a, int next) { return transition[(s * action_count + a) * state_count + next]; }
  double p(int s, int a, int next) const {
    return transition[(s * action_count + a) * state_count + next];
  }
  double& r(int s, int a) { return reward[s * action_count + a]; }
  double r(int s, int a) const { return reward[s * action_count + a]; }

  // Throws NumericError unless every distribution sums to 1 within 1e-12.
  void validate() const;
};

// Exact tensors for chain and windy-grid; goal-world throws UnsupportedError.
TabularModel as_tabular(const EnvConfig& config);
// State index of an observation from a tabular environment.
int tabular_state(const EnvConfig& config, const Observation& observation);
// Observation emitted in a given tabular state.
Observation tabular_observation(const EnvConfig& config, int state);

}  // namespace rrl
