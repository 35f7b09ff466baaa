#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "rrl/dqn.hpp"
#include "rrl/error.hpp"
#include "rrl/oracle.hpp"

using namespace rrl;
namespace fs = std::filesystem;

namespace {

ReplayTransition tagged(int action) {
  ReplayTransition t;
  t.observation = Eigen::VectorXd::Zero(1);
  t.next_observation = Eigen::VectorXd::Zero(1);
  t.action = action;
  return t;
}

double max_q_error(const MlpModel& q, const EnvConfig& env, double gamma) {
  const TabularModel model = as_tabular(env);
  const OptimalValues optimal = value_iteration(model, gamma);
  double worst = 0.0;
  for (int s = 0; s < model.state_count; ++s) {
    if (model.terminal[s]) continue;
    const Eigen::VectorXd row = q.forward(tabular_observation(env, s));
    for (int a = 0; a < model.action_count; ++a) {
      worst = std::max(worst, std::abs(row[a] - optimal.q[s * model.action_count + a]));
    }
  }
  return worst;
}

}  // namespace

TEST(ReplayBuffer, EvictsOldestOnceFull) {
  ReplayBuffer buffer(3);
  for (int i = 0; i < 5; ++i) buffer.push(tagged(i));
  ASSERT_EQ(buffer.size(), 3u);
  EXPECT_EQ(buffer.at(0).action, 2);
  EXPECT_EQ(buffer.at(1).action, 3);
  EXPECT_EQ(buffer.at(2).action, 4);
  EXPECT_THROW(buffer.at(3), ArgumentError);
  EXPECT_THROW(ReplayBuffer(0), ConfigError);
}

TEST(ReplayBuffer, SamplesAreDistinctAndUniform) {
  ReplayBuffer buffer(10);
  for (int i = 0; i < 10; ++i) buffer.push(tagged(i));
  Rng rng(1);
  std::vector<int> counts(10, 0);
  const int draws = 20000;
  for (int d = 0; d < draws; ++d) {
    const std::vector<std::size_t> picks = buffer.sample_indices(4, rng);
    ASSERT_EQ(std::set<std::size_t>(picks.begin(), picks.end()).size(), 4u);
    for (std::size_t p : picks) ++counts[p];
  }
  // Each index appears with probability 0.4 per draw.
  const double expected = 0.4 * draws, sd = std::sqrt(draws * 0.4 * 0.6);
  for (int c : counts) EXPECT_NEAR(c, expected, 5 * sd);
  EXPECT_EQ(buffer.sample_indices(10, rng).size(), 10u);
  EXPECT_THROW(buffer.sample_indices(11, rng), ArgumentError);
}

TEST(DqnConfig, EpsilonScheduleAndValidation) {
  DqnConfig config;
  EXPECT_NO_THROW(config.validate());
  EXPECT_DOUBLE_EQ(epsilon_at(config, 0), 1.0);
  EXPECT_DOUBLE_EQ(epsilon_at(config, 25000), 0.525);
  EXPECT_DOUBLE_EQ(epsilon_at(config, 50000), 0.05);
  EXPECT_DOUBLE_EQ(epsilon_at(config, 99999), 0.05);
  DqnConfig bad = config;
  bad.epsilon_end = 1.5;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = config;
  bad.buffer_capacity = 10;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = config;
  bad.train_frequency = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Dqn, RejectsContinuousActions) {
  EnvConfig world = default_env_config(EnvId::goal_world);
  world.continuous_actions = true;
  DqnConfig config;
  config.total_timesteps = 10;
  EXPECT_THROW(dqn_train(world, config, 0), UnsupportedError);
}

TEST(Dqn, DeterministicGivenSeed) {
  DqnConfig config;
  config.total_timesteps = 3000;
  config.learning_starts = 200;
  const DqnResult a = dqn_train(default_env_config(EnvId::windy_grid), config, 4);
  const DqnResult b = dqn_train(default_env_config(EnvId::windy_grid), config, 4);
  const DqnResult c = dqn_train(default_env_config(EnvId::windy_grid), config, 5);
  EXPECT_EQ(a.q_network, b.q_network);
  ASSERT_EQ(a.curve.size(), b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) EXPECT_EQ(a.curve[i].episodic_return, b.curve[i].episodic_return);
  EXPECT_FALSE(a.q_network == c.q_network);
  for (std::size_t i = 1; i < a.curve.size(); ++i) EXPECT_GT(a.curve[i].timestep, a.curve[i - 1].timestep);
}

TEST(Dqn, LearnsChainQValues) {
  DqnConfig config;
  config.total_timesteps = 20000;
  const EnvConfig chain = default_env_config(EnvId::chain);
  const DqnResult r = dqn_train(chain, config, 0);
  EXPECT_LT(max_q_error(r.q_network, chain, config.gamma), 0.1);
  EXPECT_DOUBLE_EQ(greedy_return(r.q_network, chain, 3, 1), 1.0);
}

// With a uniformly random behaviour policy the learned Q still targets Q*.
TEST(Dqn, OffPolicyUnderUniformBehaviour) {
  DqnConfig config;
  config.total_timesteps = 30000;
  config.epsilon_start = 1.0;
  config.epsilon_end = 1.0;
  const EnvConfig chain = default_env_config(EnvId::chain);
  const DqnResult r = dqn_train(chain, config, 1);
  EXPECT_LT(max_q_error(r.q_network, chain, config.gamma), 0.2);
}

TEST(Dqn, ExportedPriorRoundTrips) {
  Rng rng(2);
  const MlpModel q = MlpModel::initialized(standard_layer_dims(2, 4), rng, 1.0);
  const fs::path path = fs::temp_directory_path() / "rrl_test_dqn_prior.json";
  const PriorArtifact loaded = export_prior(q, PriorMetadata{"windy-grid", "", 3, ""}, path);
  EXPECT_EQ(loaded.kind(), PriorKind::q_function);
  EXPECT_EQ(loaded.network(), q);
  EXPECT_EQ(loaded.metadata().source_algorithm, "dqn");
  EXPECT_EQ(loaded.metadata().source_seed, 3u);
  EXPECT_FALSE(loaded.metadata().created_at.empty());
  EXPECT_EQ(loaded.action_count(), 4);
  EXPECT_THROW(load_prior(path, PriorRequirements{PriorKind::value_function, 2, 4, false}), CompatibilityError);
  EXPECT_NO_THROW(load_prior(path, PriorRequirements{PriorKind::q_function, 2, 4, false}));
  fs::remove(path);
}

TEST(Dqn, GreedyActionPicksArgmax) {
  MlpModel q({1, 3});
  q.layers()[0].biases << 0.1, 0.7, -0.2;
  EXPECT_EQ(greedy_action(q, Eigen::VectorXd::Zero(1)), 1);
}
