#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "rrl/error.hpp"
#include "rrl/harness.hpp"

using namespace rrl;
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<CurveRow> curve(const std::vector<double>& returns, long stride = 100) {
  std::vector<CurveRow> rows;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    CurveRow row;
    row.timestep = static_cast<long>(i) * stride;
    row.episodic_return_mean = returns[i];
    rows.push_back(row);
  }
  return rows;
}

RunRecord record(std::uint64_t seed, const std::vector<double>& returns) { return RunRecord{"t", seed, curve(returns)}; }

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rrl_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Scenario, DefaultsSatisfyTheirSettingRules) {
  for (int s = 1; s <= 4; ++s) {
    const ScenarioConfig config = default_scenario(s);
    EXPECT_NO_THROW(config.validate()) << s;
    EXPECT_EQ(config.target.seeds.size(), 10u);
  }
  EXPECT_THROW(default_scenario(5), ConfigError);
  EXPECT_EQ(default_scenario(1).schedule, WeaningSchedule::fixed(0.9));
  EXPECT_EQ(default_scenario(2).resolved_schedule(), WeaningSchedule::step_decay(0.5, 0.1, 10000));
}

TEST(Scenario, SettingRulesAreEnforced) {
  ScenarioConfig c = default_scenario(1);
  c.target.env.wind_enabled = true;
  c.target.env.wind_strength = 0.3;
  EXPECT_THROW(c.validate(), ConfigError);

  c = default_scenario(2);
  c.target.env = c.source.env;  // no wind change
  EXPECT_THROW(c.validate(), ConfigError);
  c = default_scenario(2);
  c.target.env.horizon = 10;  // changes more than wind
  EXPECT_THROW(c.validate(), ConfigError);
  c = default_scenario(2);
  c.schedule = WeaningSchedule::fixed(0.5);
  EXPECT_THROW(c.validate(), ConfigError);

  c = default_scenario(3);
  c.source.algorithm = SourceAlgorithm::dqn;
  EXPECT_THROW(c.validate(), ConfigError);
  c = default_scenario(3);
  c.target.env.reward_variant = RewardVariant::reach;
  EXPECT_THROW(c.validate(), ConfigError);

  c = default_scenario(4);
  c.target.seeds = {1, 1};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Scenario, YamlOverridesDefaults) {
  const ScenarioConfig c = parse_scenario(R"(
setting: 2
id: windy
mode: tbr
target:
  env: {wind_strength: 0.2}
  seeds: [3, 4]
  total_timesteps: 40960
schedule: {w0: 0.4, interval: 2048}
ppo: {learning_rate: 0.001, gae_lambda: 0.95}
dqn: {batch_size: 64}
)");
  EXPECT_EQ(c.setting, 2);
  EXPECT_EQ(c.id, "windy");
  EXPECT_EQ(c.mode, RunMode::tbr);
  EXPECT_TRUE(c.target.env.wind_enabled);
  EXPECT_DOUBLE_EQ(c.target.env.wind_strength, 0.2);
  EXPECT_EQ(c.target.seeds, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_EQ(c.target_train_config().total_timesteps, 40960);
  EXPECT_EQ(c.resolved_schedule(), WeaningSchedule::step_decay(0.4, 0.1, 2048));
  EXPECT_DOUBLE_EQ(c.ppo.learning_rate, 0.001);
  EXPECT_EQ(c.ppo.gae_lambda, 0.95);
  EXPECT_EQ(c.dqn.batch_size, 64);
  EXPECT_EQ(c.source.seeds.size(), 3u);
}

TEST(Scenario, YamlRejectsUnknownAndMalformed) {
  EXPECT_THROW(parse_scenario("setting: 1\nbogus: 3\n"), ConfigError);
  EXPECT_THROW(parse_scenario("setting: 1\nppo: {lr: 3}\n"), ConfigError);
  EXPECT_THROW(parse_scenario("setting: 1\ntarget: {env: {wind: true}}\n"), ConfigError);
  EXPECT_THROW(parse_scenario("id: x\n"), ConfigError);
  EXPECT_THROW(parse_scenario("setting: [1\n"), ConfigError);
  EXPECT_THROW(parse_scenario("setting: 1\nmode: both\n"), ConfigError);
  EXPECT_THROW(parse_scenario("setting: 1\nppo: {gamma: abc}\n"), ConfigError);
  EXPECT_THROW(load_scenario("/nonexistent/config.yaml"), IoError);
}

TEST(Scenario, OverridesReachBothBudgets) {
  ScenarioConfig c = default_scenario(2);
  ScenarioOverrides o;
  o.mode = RunMode::tbr;
  o.seeds = std::vector<std::uint64_t>{7};
  o.total_timesteps = 20480;
  o.w_decrement = 0.05;
  apply_overrides(c, o);
  EXPECT_EQ(c.mode, RunMode::tbr);
  EXPECT_EQ(c.target.seeds, std::vector<std::uint64_t>{7});
  EXPECT_EQ(c.source.total_timesteps, 20480);
  EXPECT_EQ(c.resolved_schedule(), WeaningSchedule::step_decay(0.5, 0.05, 2048));
  EXPECT_NO_THROW(c.validate());
}

TEST(Csv, HeaderAndRoundTrip) {
  std::vector<CurveRow> rows = {{0, kNaN, 0.0, 0.9, 1.5, -0.25, 1.386}, {2048, 0.1 + 0.2, 1e-17, 0.9, 3.0, 2.0, 1.0}};
  std::ostringstream out;
  write_run_csv(rows, out);
  const std::string text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), kCsvHeader);
  std::istringstream in(text);
  const std::vector<CurveRow> back = read_run_csv(in);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_TRUE(std::isnan(back[0].episodic_return_mean));
  EXPECT_EQ(back[1], rows[1]);
  EXPECT_EQ(back[0].entropy, rows[0].entropy);
}

TEST(Csv, RejectsMalformedInput) {
  std::istringstream bad_header("timestep,return\n0,1\n");
  EXPECT_THROW(read_run_csv(bad_header), IoError);
  std::istringstream short_row(std::string(kCsvHeader) + "\n0,1,2\n");
  EXPECT_THROW(read_run_csv(short_row), IoError);
  std::istringstream backwards(std::string(kCsvHeader) + "\n10,0,0,0,0,0,0\n10,0,0,0,0,0,0\n");
  EXPECT_THROW(read_run_csv(backwards), IoError);
  EXPECT_THROW(read_run_csv(fs::path("/nonexistent.csv")), IoError);
}

TEST(Metrics, FinalReturnUsesLastTenthAndSkipsNaN) {
  std::vector<double> r(20, 0.0);
  r[18] = kNaN;
  r[19] = 0.8;
  EXPECT_DOUBLE_EQ(final_return(curve(r)), 0.8);
  EXPECT_DOUBLE_EQ(final_return(curve({0.1, 0.2, 0.3})), 0.3);
  EXPECT_TRUE(std::isnan(final_return(curve({0.5, kNaN}))));
}

TEST(Metrics, StepsToThreshold) {
  EXPECT_EQ(steps_to_threshold(curve({0.1, kNaN, 0.5, 0.9, 0.2}), 0.5), 200.0);
  EXPECT_EQ(steps_to_threshold(curve({0.1, 0.2}), 0.5), kInf);
}

TEST(Compare, MedianHandlesInfinity) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_EQ(median({1.0, kInf}), kInf);
  EXPECT_EQ(median({1.0, 2.0, kInf}), 2.0);
}

TEST(Compare, IdenticalArmsTie) {
  const std::vector<RunRecord> runs = {record(0, {0.1, 0.5, 0.9}), record(1, {0.6, 0.7, 0.8})};
  const ComparisonSummary s = compare_runs(runs, runs, 0.5);
  EXPECT_EQ(s.rrl_median_steps, s.tbr_median_steps);
  EXPECT_EQ(s.ties, 2);
  EXPECT_EQ(s.rrl_wins + s.tbr_wins, 0);
  EXPECT_EQ(s.rrl_mean_final, s.tbr_mean_final);
}

TEST(Compare, DominatingArmWins) {
  const std::vector<RunRecord> fast = {record(0, {0.9, 0.9}), record(1, {0.1, 0.9})};
  const std::vector<RunRecord> slow = {record(0, {0.1, 0.9}), record(1, {0.1, 0.2})};
  const ComparisonSummary s = compare_runs(fast, slow, 0.5);
  EXPECT_EQ(s.rrl_wins, 2);
  EXPECT_EQ(s.rrl_median_steps, 50.0);
  EXPECT_EQ(s.tbr_median_steps, kInf);
  std::ostringstream out;
  print_comparison(s, out);
  EXPECT_NE(out.str().find("inf"), std::string::npos);
}

TEST(Compare, MismatchedSeedsRejected) {
  EXPECT_THROW(compare_runs({record(0, {1.0})}, {record(1, {1.0})}, 0.5), ArgumentError);
  EXPECT_THROW(compare_runs({}, {}, 0.5), ArgumentError);
}

TEST(Compare, ReadsRunDirectories) {
  const fs::path dir = fresh_dir("compare");
  for (std::uint64_t seed : {2u, 10u}) {
    write_run_csv(record(seed, {0.1, 0.7}), dir / "rrl" / ("seed_" + std::to_string(seed) + ".csv"));
    write_run_csv(record(seed, {0.1, 0.2}), dir / "tbr" / ("seed_" + std::to_string(seed) + ".csv"));
  }
  const std::vector<RunRecord> runs = read_run_dir(dir / "rrl");
  ASSERT_EQ(runs.size(), 2u);
  EXPECT_EQ(runs[0].seed, 2u);
  EXPECT_EQ(runs[1].seed, 10u);
  const ComparisonSummary s = compare(dir / "rrl", dir / "tbr", 0.5);
  EXPECT_EQ(s.rrl_wins, 2);
  EXPECT_THROW(compare(dir / "rrl", dir / "missing", 0.5), IoError);
  fs::remove_all(dir);
}

TEST(RunScenario, TabulaRasaIsDeterministic) {
  ScenarioConfig c = default_scenario(1);
  c.mode = RunMode::tbr;
  c.target.seeds = {0, 1};
  c.target.total_timesteps = 4096;
  const fs::path a = fresh_dir("tbr_a"), b = fresh_dir("tbr_b");
  const ScenarioResult ra = run_scenario(c, a);
  run_scenario(c, b);
  EXPECT_FALSE(ra.prior_path);
  ASSERT_EQ(ra.target_runs.size(), 2u);
  EXPECT_EQ(ra.target_runs[0].rows.size(), 2u);
  EXPECT_EQ(slurp(a / "tbr" / "seed_0.csv"), slurp(b / "tbr" / "seed_0.csv"));
  EXPECT_NE(slurp(a / "tbr" / "seed_0.csv"), slurp(a / "tbr" / "seed_1.csv"));
  EXPECT_FALSE(fs::exists(a / "prior.json"));
  for (const RunRecord& run : ra.target_runs) {
    for (const CurveRow& row : run.rows) EXPECT_EQ(row.w_t, 0.0);
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(RunScenario, ReincarnatedRunUsesFixedWeightAndWritesPrior) {
  ScenarioConfig c = default_scenario(1);
  c.source.seeds = {0, 1};
  c.source.total_timesteps = 3000;
  c.target.seeds = {0};
  c.target.total_timesteps = 4096;
  const fs::path dir = fresh_dir("rrl");
  const ScenarioResult r = run_scenario(c, dir);
  ASSERT_TRUE(r.prior_path);
  EXPECT_TRUE(fs::exists(dir / "prior.json"));
  EXPECT_TRUE(fs::exists(dir / "source" / "seed_0.csv"));
  EXPECT_TRUE(fs::exists(dir / "source" / "seed_1.csv"));
  const PriorArtifact prior = load_prior(*r.prior_path);
  EXPECT_EQ(prior.kind(), PriorKind::q_function);
  EXPECT_EQ(prior.metadata().source_seed, *r.prior_seed);
  for (const CurveRow& row : read_run_csv(dir / "rrl" / "seed_0.csv")) EXPECT_EQ(row.w_t, 0.9);

  // A reused artifact skips source training.
  ScenarioConfig reuse = c;
  reuse.source.prior_path = *r.prior_path;
  const fs::path again = fresh_dir("rrl_reuse");
  run_scenario(reuse, again);
  EXPECT_FALSE(fs::exists(again / "source"));
  EXPECT_EQ(slurp(dir / "rrl" / "seed_0.csv"), slurp(again / "rrl" / "seed_0.csv"));
  fs::remove_all(dir);
  fs::remove_all(again);
}

TEST(RunScenario, IncompatiblePriorRejectedBeforeTraining) {
  const fs::path dir = fresh_dir("incompatible");
  Rng rng(1);
  save_prior(PriorArtifact(PriorKind::value_function, make_value_network(4, rng), PriorMetadata{"goal-world", "pg", 0, "t"}),
             dir / "v.json");
  ScenarioConfig c = default_scenario(1);
  c.source.prior_path = dir / "v.json";
  c.target.seeds = {0};
  c.target.total_timesteps = 2048;
  EXPECT_THROW(run_scenario(c, dir / "out"), CompatibilityError);
  EXPECT_FALSE(fs::exists(dir / "out" / "rrl" / "seed_0.csv"));
  fs::remove_all(dir);
}

TEST(Verify, QuickSuitePasses) {
  const std::vector<CheckResult> checks = verify(VerifyLevel::quick);
  EXPECT_TRUE(all_passed(checks));
  std::ostringstream out;
  print_checks(checks, out);
  EXPECT_EQ(out.str().find("FAIL"), std::string::npos) << out.str();
  EXPECT_THROW(parse_verify_level("slow"), ConfigError);
}
