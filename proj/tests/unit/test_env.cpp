#include <gtest/gtest.h>

#include "rrl/env.hpp"
#include "rrl/error.hpp"

using namespace rrl;

namespace {

EnvConfig windy(double strength) {
  EnvConfig config = default_env_config(EnvId::windy_grid);
  config.wind_enabled = strength > 0.0;
  config.wind_strength = strength;
  return config;
}

EnvConfig goal_world(RewardVariant variant, bool continuous = true) {
  EnvConfig config = default_env_config(EnvId::goal_world);
  config.reward_variant = variant;
  config.continuous_actions = continuous;
  return config;
}

}  // namespace

TEST(Chain, RightFourTimesReachesGoal) {
  auto env = make_environment(default_env_config(EnvId::chain));
  Observation obs = env->reset(1);
  EXPECT_DOUBLE_EQ(obs[0], 0.0);
  double total = 0.0;
  StepResult step;
  for (int i = 0; i < 4; ++i) {
    step = env->step(1);
    total += step.reward;
  }
  EXPECT_TRUE(step.terminated);
  EXPECT_FALSE(step.truncated);
  EXPECT_DOUBLE_EQ(total, 1.0);
  EXPECT_DOUBLE_EQ(step.observation[0], 1.0);
}

TEST(Chain, LeftAtStartStays) {
  auto env = make_environment(default_env_config(EnvId::chain));
  env->reset(0);
  const StepResult step = env->step(0);
  EXPECT_DOUBLE_EQ(step.observation[0], 0.0);
  EXPECT_DOUBLE_EQ(step.reward, 0.0);
}

TEST(Environment, TruncatesAtHorizon) {
  EnvConfig config = default_env_config(EnvId::chain);
  config.horizon = 3;
  auto env = make_environment(config);
  env->reset(0);
  EXPECT_FALSE(env->step(0).truncated);
  EXPECT_FALSE(env->step(0).truncated);
  const StepResult last = env->step(0);
  EXPECT_TRUE(last.truncated);
  EXPECT_FALSE(last.terminated);
  EXPECT_FALSE(env->episode_active());
}

TEST(Environment, TerminationIsNotTruncation) {
  EnvConfig config = default_env_config(EnvId::chain);
  config.horizon = 4;
  auto env = make_environment(config);
  env->reset(0);
  StepResult step;
  for (int i = 0; i < 4; ++i) step = env->step(1);
  EXPECT_TRUE(step.terminated);
  EXPECT_FALSE(step.truncated);
}

TEST(Environment, StepAfterEpisodeEndThrows) {
  EnvConfig config = default_env_config(EnvId::chain);
  config.horizon = 1;
  auto env = make_environment(config);
  EXPECT_THROW(env->step(0), StateError);
  env->reset(0);
  env->step(0);
  EXPECT_THROW(env->step(0), StateError);
}

TEST(Environment, RejectsBadActions) {
  auto chain = make_environment(default_env_config(EnvId::chain));
  chain->reset(0);
  EXPECT_THROW(chain->step(2), ArgumentError);
  EXPECT_THROW(chain->step(-1), ArgumentError);
  EXPECT_THROW(chain->step(Eigen::VectorXd::Zero(1)), ArgumentError);

  auto world = make_environment(goal_world(RewardVariant::reach));
  world->reset(0);
  EXPECT_THROW(world->step(0), ArgumentError);
  EXPECT_THROW(world->step(Eigen::VectorXd::Zero(3)), ArgumentError);
  Eigen::VectorXd nan_action = Eigen::VectorXd::Zero(2);
  nan_action[0] = std::nan("");
  EXPECT_THROW(world->step(nan_action), ArgumentError);
}

TEST(EnvConfig, ParsesNamesAndRejectsUnknown) {
  EXPECT_EQ(parse_env_id("windy-grid"), EnvId::windy_grid);
  EXPECT_EQ(parse_reward_variant("reach-fast"), RewardVariant::reach_fast);
  EXPECT_EQ(to_string(EnvId::goal_world), "goal-world");
  EXPECT_THROW(parse_env_id("cartpole"), ConfigError);
  EXPECT_THROW(parse_reward_variant("fast"), ConfigError);
  EnvConfig bad = windy(0.3);
  bad.wind_strength = 1.5;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = default_env_config(EnvId::chain);
  bad.horizon = 0;
  EXPECT_THROW(make_environment(bad), ConfigError);
}

TEST(ActionSpace, RejectsDegenerateSpaces) {
  EXPECT_THROW(ActionSpace::discrete(1), ArgumentError);
  EXPECT_THROW(ActionSpace::continuous(Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(2)), ArgumentError);
}

TEST(WindyGrid, CalmShortestPathReturn) {
  auto env = make_environment(windy(0.0));
  env->reset(0);
  double total = 0.0;
  StepResult step;
  for (int action : {0, 0, 0, 0, 2, 2, 2, 2}) {
    step = env->step(action);
    total += step.reward;
  }
  EXPECT_TRUE(step.terminated);
  EXPECT_NEAR(total, 0.92, 1e-12);
}

TEST(WindyGrid, SameSeedSameTrajectory) {
  auto a = make_environment(windy(0.3));
  auto b = make_environment(windy(0.3));
  a->reset(42);
  b->reset(42);
  for (int i = 0; i < 30 && a->episode_active(); ++i) {
    const StepResult sa = a->step(i % 4);
    const StepResult sb = b->step(i % 4);
    EXPECT_EQ(sa.observation, sb.observation);
  }
}

// Monte Carlo frequency of a wind push from (0,0) under action +y.
TEST(WindyGrid, WindFrequencyMatchesStrength) {
  auto env = make_environment(windy(0.3));
  env->reset(5);
  const int n = 20000;
  int pushed = 0;
  for (int i = 0; i < n; ++i) {
    if (i > 0) env->reset();
    const StepResult step = env->step(2);
    if (step.observation[0] > 0.0) ++pushed;
  }
  const double p = static_cast<double>(pushed) / n;
  const double se = std::sqrt(0.3 * 0.7 / n);
  EXPECT_NEAR(p, 0.3, 4 * se);
}

TEST(GoalWorld, StartsAwayFromGoal) {
  auto env = make_environment(goal_world(RewardVariant::reach));
  env->reset(3);
  for (int i = 0; i < 500; ++i) {
    const Observation obs = i == 0 ? env->reset(3) : env->reset();
    const double dist = std::hypot(obs[0] - GoalWorldEnv::kGoalX, obs[1] - GoalWorldEnv::kGoalY);
    EXPECT_GE(dist, GoalWorldEnv::kMinStartDistance);
    EXPECT_DOUBLE_EQ(obs[2], 0.5);
    EXPECT_DOUBLE_EQ(obs[3], 0.5);
  }
}

TEST(GoalWorld, StaysInUnitSquareWithBoundedSpeed) {
  auto env = make_environment(goal_world(RewardVariant::reach));
  env->reset(9);
  Eigen::VectorXd push(2);
  push << -1.0, -1.0;
  for (int i = 0; i < 60 && env->episode_active(); ++i) {
    const StepResult step = env->step(push);
    for (int k = 0; k < 4; ++k) {
      EXPECT_GE(step.observation[k], 0.0);
      EXPECT_LE(step.observation[k], 1.0);
    }
  }
}

TEST(GoalWorld, ReachFastAddsShapingAndLivingCost) {
  auto reach = make_environment(goal_world(RewardVariant::reach));
  auto fast = make_environment(goal_world(RewardVariant::reach_fast));
  const Observation start = reach->reset(11);
  fast->reset(11);
  // Stand still: no shaping, only the living cost.
  const StepResult a = reach->step(Eigen::VectorXd::Zero(2));
  const StepResult b = fast->step(Eigen::VectorXd::Zero(2));
  EXPECT_DOUBLE_EQ(a.reward, 0.0);
  EXPECT_DOUBLE_EQ(b.reward, -GoalWorldEnv::kLivingCost);
  EXPECT_EQ(a.observation, b.observation);
  // Accelerate towards the goal: positive shaping.
  Eigen::VectorXd toward(2);
  toward << GoalWorldEnv::kGoalX - start[0], GoalWorldEnv::kGoalY - start[1];
  toward /= toward.cwiseAbs().maxCoeff();
  const StepResult c = fast->step(toward);
  EXPECT_GT(c.reward, -GoalWorldEnv::kLivingCost);
}

TEST(GoalWorld, DiscreteVariantHasFourActions) {
  auto env = make_environment(goal_world(RewardVariant::reach, false));
  EXPECT_TRUE(env->action_space().is_discrete());
  EXPECT_EQ(env->action_space().count, 4);
  EXPECT_EQ(env->observation_dim(), 4);
}

TEST(Tabular, ChainModelIsValidAndAbsorbing) {
  const TabularModel model = as_tabular(default_env_config(EnvId::chain));
  EXPECT_NO_THROW(model.validate());
  EXPECT_TRUE(model.terminal[4]);
  EXPECT_DOUBLE_EQ(model.p(4, 0, 4), 1.0);
  EXPECT_DOUBLE_EQ(model.r(4, 1), 0.0);
  EXPECT_DOUBLE_EQ(model.r(3, 1), 1.0);
}

TEST(Tabular, WindyModelMatchesSimulatorFrequencies) {
  const EnvConfig config = windy(0.3);
  const TabularModel model = as_tabular(config);
  ASSERT_NO_THROW(model.validate());
  auto env = make_environment(config);
  env->reset(17);
  const int n = 20000;
  std::vector<int> counts(model.state_count, 0);
  for (int i = 0; i < n; ++i) {
    if (i > 0) env->reset();
    env->step(0);
    const StepResult step = env->step(2);  // from (1,0) or (2,0)
    ++counts[tabular_state(config, step.observation)];
  }
  // Two-step distribution from the start under (+x, +y).
  std::vector<double> expected(model.state_count, 0.0);
  for (int mid = 0; mid < model.state_count; ++mid) {
    const double p1 = model.p(0, 0, mid);
    if (p1 == 0.0) continue;
    for (int next = 0; next < model.state_count; ++next) expected[next] += p1 * model.p(mid, 2, next);
  }
  for (int s = 0; s < model.state_count; ++s) {
    const double p = expected[s];
    const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / n);
    EXPECT_NEAR(static_cast<double>(counts[s]) / n, p, 4 * se + 1e-12) << "state " << s;
  }
}

TEST(Tabular, ObservationIndexRoundTrip) {
  for (EnvId id : {EnvId::chain, EnvId::windy_grid}) {
    const EnvConfig config = default_env_config(id);
    const TabularModel model = as_tabular(config);
    for (int s = 0; s < model.state_count; ++s) EXPECT_EQ(tabular_state(config, tabular_observation(config, s)), s);
  }
}

TEST(Tabular, GoalWorldUnsupported) {
  EXPECT_THROW(as_tabular(goal_world(RewardVariant::reach)), UnsupportedError);
}
