#include <gtest/gtest.h>

#include <cmath>

#include "rrl/error.hpp"
#include "rrl/oracle.hpp"

using namespace rrl;

namespace {

// Frozen from an independent enumeration of the fixture MDP.
const double kFixtureGradient[] = {-0.8564371442115573, 0.8564371442115578, 0.7588513970037826, -0.758851397003782};
constexpr double kFixtureReturn = 5.568725366226348;
const double kFixtureV1[] = {2.132622006394436, 3.510548808840806};
const double kFixtureV2[] = {4.767193077618854, 6.370257654833841};
constexpr double kFixtureTraceNone = 20.190040601227476;
constexpr double kFixtureTraceExactV = 3.1354715085040037;

TabularModel single_state_loop() {
  TabularModel model(1, 1, 1);
  model.p(0, 0, 0) = 1.0;
  model.r(0, 0) = 1.0;
  model.initial_distribution[0] = 1.0;
  return model;
}

}  // namespace

TEST(LinearSolve, SolvesAndDetectsSingularity) {
  const auto x = solve_linear_system({0.0, 2.0, 1.0, 1.0}, {4.0, 3.0}, 2);  // needs a pivot swap
  EXPECT_NEAR(x[0], 1.0, 1e-15);
  EXPECT_NEAR(x[1], 2.0, 1e-15);
  EXPECT_THROW(solve_linear_system({1.0, 2.0, 2.0, 4.0}, {1.0, 2.0}, 2), NumericError);
  EXPECT_THROW(solve_linear_system({1.0}, {1.0, 2.0}, 2), ArgumentError);
}

TEST(ExactValue, GeometricSelfLoop) {
  const TabularModel model = single_state_loop();
  const auto v = exact_value(model, TabularPolicy::uniform(1, 1), 0.5);
  EXPECT_DOUBLE_EQ(v[0], 2.0);
  // gamma = 1 with no terminal state: improper.
  EXPECT_THROW(exact_value(model, TabularPolicy::uniform(1, 1), 1.0), NumericError);
}

TEST(ExactValue, ZeroRewardsGiveZeroValues) {
  TabularModel model = as_tabular(default_env_config(EnvId::windy_grid));
  std::fill(model.reward.begin(), model.reward.end(), 0.0);
  for (double v : exact_value(model, TabularPolicy::uniform(25, 4), 0.9)) EXPECT_EQ(v, 0.0);
}

TEST(ExactValue, LinearSolveAgreesWithBackwardInduction) {
  const EnvConfig config = default_env_config(EnvId::chain);
  const TabularModel model = as_tabular(config);
  const TabularPolicy uniform = TabularPolicy::uniform(model.state_count, model.action_count);
  const auto solved = exact_value(model, uniform, 0.99);
  const auto induction = finite_horizon_values(model, uniform, 0.99, 5000);
  for (int s = 0; s < model.state_count; ++s) EXPECT_NEAR(solved[s], induction.back()[s], 1e-8);
  EXPECT_EQ(solved[4], 0.0);
}

TEST(ExactValue, UndiscountedChainIsProperUnderUniform) {
  const TabularModel model = as_tabular(default_env_config(EnvId::chain));
  const auto v = exact_value(model, TabularPolicy::uniform(5, 2), 1.0);
  // Every proper policy reaches the single rewarding terminal almost surely.
  for (int s = 0; s < 4; ++s) EXPECT_NEAR(v[s], 1.0, 1e-10);
}

TEST(ExactQ, TerminalAdjacentEqualsReward) {
  const TabularModel model = as_tabular(default_env_config(EnvId::chain));
  const auto q = exact_q(model, TabularPolicy::uniform(5, 2), 0.99);
  EXPECT_DOUBLE_EQ(q[3 * 2 + 1], 1.0);  // state 3, right -> terminal
}

TEST(ExactQ, ExpectationIdentityForRandomPolicies) {
  Rng rng(3);
  for (EnvId id : {EnvId::chain, EnvId::windy_grid}) {
    EnvConfig config = default_env_config(id);
    config.wind_enabled = id == EnvId::windy_grid;
    config.wind_strength = 0.3;
    const TabularModel model = as_tabular(config);
    for (int p = 0; p < 20; ++p) {
      const TabularPolicy policy = TabularPolicy::random(model.state_count, model.action_count, rng);
      ASSERT_NO_THROW(policy.validate());
      const auto v = exact_value(model, policy, 0.95);
      const auto q = exact_q(model, policy, 0.95);
      for (int s = 0; s < model.state_count; ++s) {
        double sum = 0.0;
        for (int a = 0; a < model.action_count; ++a) sum += policy(s, a) * q[s * model.action_count + a];
        EXPECT_NEAR(sum, v[s], 1e-10);
      }
    }
  }
}

// Monte Carlo discounted returns from (s, a), following pi afterwards.
TEST(ExactQ, MatchesMonteCarloRollouts) {
  EnvConfig config = default_env_config(EnvId::windy_grid);
  config.wind_enabled = true;
  config.wind_strength = 0.3;
  const TabularModel model = as_tabular(config);
  const double gamma = 0.9;
  Rng rng(5);
  const TabularPolicy policy = TabularPolicy::random(model.state_count, model.action_count, rng);
  const auto q = exact_q(model, policy, gamma);
  auto draw = [&](const double* p, int n) {
    const double u = uniform01(rng);
    double c = 0.0;
    for (int i = 0; i < n; ++i) {
      c += p[i];
      if (u < c) return i;
    }
    return n - 1;
  };
  const int start = WindyGridEnv::state_index(2, 3);
  for (int a = 0; a < 4; ++a) {
    const int n = 50000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      int s = start, action = a;
      double g = 0.0, discount = 1.0;
      for (int t = 0; t < 200 && !model.terminal[s]; ++t) {
        g += discount * model.r(s, action);
        discount *= gamma;
        s = draw(&model.transition[(s * 4 + action) * model.state_count], model.state_count);
        action = draw(&policy.probabilities[s * 4], 4);
      }
      sum += g;
      sq += g * g;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / n);
    EXPECT_NEAR(mean, q[start * 4 + a], 3 * se + 1e-6) << "action " << a;
  }
}

TEST(ValueIteration, ChainOptimalValuesAreDiscountedDistance) {
  const TabularModel model = as_tabular(default_env_config(EnvId::chain));
  const OptimalValues opt = value_iteration(model, 0.99);
  for (int s = 0; s < 4; ++s) {
    EXPECT_NEAR(opt.v[s], std::pow(0.99, 3 - s), 1e-12);
    EXPECT_NEAR(opt.q[s * 2 + 1], std::pow(0.99, 3 - s), 1e-12);
  }
  EXPECT_NEAR(opt.q[0], 0.99 * opt.v[0], 1e-12);  // left at the wall
  EXPECT_THROW(value_iteration(model, 1.0), ArgumentError);
}

TEST(Enumeration, FixtureGradientReturnAndValues) {
  const EnumerationFixture fx = enumeration_fixture();
  const ExactGradient g = exact_policy_gradient(fx.model, fx.logits, fx.horizon, fx.gamma);
  ASSERT_EQ(g.values.size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(g.values[i], kFixtureGradient[i], 1e-13);
  EXPECT_NEAR(expected_return(fx.model, fx.logits, fx.horizon, fx.gamma), kFixtureReturn, 1e-13);
  const TabularPolicy policy = TabularPolicy::from_logits(fx.logits, 2, 2);
  const auto to_go = finite_horizon_values(fx.model, policy, fx.gamma, 2);
  for (int s = 0; s < 2; ++s) {
    EXPECT_EQ(to_go[0][s], 0.0);
    EXPECT_NEAR(to_go[1][s], kFixtureV1[s], 1e-13);
    EXPECT_NEAR(to_go[2][s], kFixtureV2[s], 1e-13);
  }
  // J = sum_s mu(s) V_H(s)
  EXPECT_NEAR(0.5 * to_go[2][0] + 0.5 * to_go[2][1], kFixtureReturn, 1e-13);
}

TEST(Enumeration, GradientMatchesFiniteDifferencesOfReturn) {
  EnvConfig config = default_env_config(EnvId::chain);
  TabularModel model = as_tabular(config);
  Rng rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> logits(10);
  for (double& l : logits) l = normal(rng);
  for (double gamma : {1.0, 0.9}) {
    const ExactGradient g = exact_policy_gradient(model, logits, 6, gamma);
    const double h = 1e-5;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      std::vector<double> up = logits, down = logits;
      up[i] += h;
      down[i] -= h;
      const double numeric = (expected_return(model, up, 6, gamma) - expected_return(model, down, 6, gamma)) / (2 * h);
      const double scale = std::max({std::abs(numeric), std::abs(g.values[i]), 1e-8});
      EXPECT_LT(std::abs(numeric - g.values[i]) / scale, 1e-6) << "logit " << i;
    }
  }
}

TEST(Enumeration, ScoreFunctionHasZeroMean) {
  const EnumerationFixture fx = enumeration_fixture();
  for (double s : score_function_mean(fx.model, fx.logits, fx.horizon)) EXPECT_LT(std::abs(s), 1e-10);
  const TabularModel chain = as_tabular(default_env_config(EnvId::chain));
  const std::vector<double> logits = {0.3, -0.2, 0.1, 0.5, -0.4, 0.0, 0.2, 0.2, 1.0, -1.0};
  for (double s : score_function_mean(chain, logits, 7)) EXPECT_LT(std::abs(s), 1e-10);
}

TEST(Enumeration, ConstantRewardGivesZeroGradient) {
  TabularModel model = enumeration_fixture().model;
  std::fill(model.reward.begin(), model.reward.end(), 2.0);
  for (double g : exact_policy_gradient(model, enumeration_fixture().logits, 2, 1.0).values) {
    EXPECT_LT(std::abs(g), 1e-12);
  }
}

TEST(Enumeration, GuardsAgainstLargeProblems) {
  const TabularModel grid = as_tabular(default_env_config(EnvId::windy_grid));  // 25 x 4 = 100 cells
  EXPECT_THROW(exact_policy_gradient(grid, std::vector<double>(100, 0.0), 2, 1.0), UnsupportedError);
  const TabularModel chain = as_tabular(default_env_config(EnvId::chain));
  EXPECT_THROW(exact_policy_gradient(chain, std::vector<double>(10, 0.0), 9, 1.0), UnsupportedError);
}

TEST(GradientVariance, TracesMatchEnumeratedTraces) {
  const EnumerationFixture fx = enumeration_fixture();
  const StateBaseline exact_v = exact_value_baseline(fx.model, fx.logits, fx.horizon, fx.gamma);
  Rng rng(9);
  const auto r = gradient_variance(fx.model, fx.logits, fx.horizon, fx.gamma, {std::nullopt, exact_v}, 100000, rng);
  EXPECT_NEAR(r[0].covariance_trace, kFixtureTraceNone, 4 * r[0].standard_error);
  EXPECT_NEAR(r[1].covariance_trace, kFixtureTraceExactV, 4 * r[1].standard_error);
  EXPECT_LE(paired_trace_difference_se(r[0], r[1]), std::hypot(r[0].standard_error, r[1].standard_error) * 1.5);
}

// The jackknife SE should track the spread of the trace across replicates.
TEST(GradientVariance, StandardErrorIsCalibrated) {
  const EnumerationFixture fx = enumeration_fixture();
  Rng rng(10);
  const int reps = 200;
  double sum = 0.0, sq = 0.0, se_sum = 0.0;
  for (int i = 0; i < reps; ++i) {
    const GradientVariance r = gradient_variance(fx.model, fx.logits, fx.horizon, fx.gamma, std::nullopt, 2000, rng);
    sum += r.covariance_trace;
    sq += r.covariance_trace * r.covariance_trace;
    se_sum += r.standard_error;
  }
  const double spread = std::sqrt((sq - sum * sum / reps) / (reps - 1));
  EXPECT_NEAR(se_sum / reps / spread, 1.0, 0.2);
}

TEST(GradientVariance, ConstantBaselineLeavesMeanUnchanged) {
  const EnumerationFixture fx = enumeration_fixture();
  Rng rng(11);
  const auto r = gradient_variance(fx.model, fx.logits, fx.horizon, fx.gamma,
                                   {std::nullopt, StateBaseline::per_state({3.0, 3.0})}, 200000, rng);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(r[1].mean_gradient[i], kFixtureGradient[i], 0.05);
    EXPECT_NEAR(r[0].mean_gradient[i], kFixtureGradient[i], 0.05);
  }
}

TEST(GradientVariance, RejectsBadArguments) {
  const EnumerationFixture fx = enumeration_fixture();
  Rng rng(12);
  EXPECT_THROW(gradient_variance(fx.model, fx.logits, 2, 1.0, std::nullopt, 1, rng), ArgumentError);
  EXPECT_THROW(gradient_variance(fx.model, fx.logits, 2, 1.0, StateBaseline::per_state({1.0}), 10, rng),
               ArgumentError);
  EXPECT_THROW(gradient_variance(fx.model, fx.logits, 3, 1.0,
                                 StateBaseline::per_step({{1.0, 1.0}, {1.0, 1.0}}), 10, rng),
               ArgumentError);
}

TEST(TabularPolicy, FactoriesProduceValidRows) {
  Rng rng(13);
  EXPECT_NO_THROW(TabularPolicy::uniform(3, 4).validate());
  EXPECT_NO_THROW(TabularPolicy::random(3, 4, rng).validate());
  const TabularPolicy p = TabularPolicy::from_logits(std::vector<double>{0.0, std::log(3.0)}, 1, 2);
  EXPECT_NEAR(p(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(p(0, 1), 0.75, 1e-15);
  EXPECT_THROW(TabularPolicy::from_logits(std::vector<double>(3, 0.0), 1, 2), ArgumentError);
}
