#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rrl/dqn.hpp"
#include "rrl/env.hpp"
#include "rrl/pg.hpp"
#include "rrl/reincarnation.hpp"

namespace rrl {

enum class SourceAlgorithm { dqn, pg };
enum class RunMode { rrl, tbr };

std::string to_string(SourceAlgorithm algorithm);
std::string to_string(RunMode mode);
SourceAlgorithm parse_source_algorithm(const std::string& text);
RunMode parse_run_mode(const std::string& text);

struct SourceSpec {
  EnvConfig env;
  SourceAlgorithm algorithm = SourceAlgorithm::dqn;
  std::vector<std::uint64_t> seeds;
  long total_timesteps = 100000;
  // Reuse an existing artifact instead of training the source.
  std::optional<std::filesystem::path> prior_path;
};

struct TargetSpec {
  EnvConfig env;
  std::vector<std::uint64_t> seeds;
  long total_timesteps = 100000;
};

struct ScenarioConfig {
  int setting = 1;
  std::string id;
  RunMode mode = RunMode::rrl;
  SourceSpec source;
  TargetSpec target;
  // interval_steps == 0 means one tenth of the target budget.
  WeaningSchedule schedule;
  TrainConfig ppo;
  DqnConfig dqn;

  WeaningSchedule resolved_schedule() const;
  TrainConfig target_train_config() const;
  TrainConfig source_train_config() const;
  DqnConfig source_dqn_config() const;

  // Structural rules per setting:
  //   1: source env == target env, dqn source, fixed schedule
  //   2: envs differ in wind only, dqn source, step_decay
  //   3: envs differ in reward_variant only, pg source, step_decay
  //   4: source env == target env, pg source, step_decay
  // Throws ConfigError on any violation.
  void validate() const;
};

// Desk-scale defaults for settings 1-4.
ScenarioConfig default_scenario(int setting);

// YAML document; keys absent from the file keep the defaults of its setting.
// Unknown keys are rejected.
ScenarioConfig parse_scenario(const std::string& text);
ScenarioConfig load_scenario(const std::filesystem::path& path);

struct ScenarioOverrides {
  std::optional<int> setting;
  std::optional<RunMode> mode;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<long> total_timesteps;  // source and target budgets
  std::optional<double> w0;
  std::optional<double> w_decrement;
  std::optional<long> w_interval;
};
void apply_overrides(ScenarioConfig& config, const ScenarioOverrides& overrides);

// --- learning-curve records ------------------------------------------------------

inline constexpr const char* kCsvHeader = "timestep,episodic_return_mean,episodic_return_std,w_t,value_loss,policy_loss,entropy";

struct CurveRow {
  long timestep = 0;
  double episodic_return_mean = 0.0;
  double episodic_return_std = 0.0;
  double w_t = 0.0;
  double value_loss = 0.0;
  double policy_loss = 0.0;
  double entropy = 0.0;

  bool operator==(const CurveRow&) const = default;
};

struct RunRecord {
  std::string scenario_id;
  std::uint64_t seed = 0;
  std::vector<CurveRow> rows;
};

CurveRow to_curve_row(const TrainRow& row);
void write_run_csv(const std::vector<CurveRow>& rows, std::ostream& out);
void write_run_csv(const RunRecord& record, const std::filesystem::path& path);
// Validates the header, column count and strictly increasing timesteps.
std::vector<CurveRow> read_run_csv(std::istream& in);
std::vector<CurveRow> read_run_csv(const std::filesystem::path& path);
// seed_<N>.csv files of a run directory, keyed by N.
std::vector<RunRecord> read_run_dir(const std::filesystem::path& dir);

// Mean of episodic_return_mean over the last 10% of rows (at least one),
// skipping rollouts in which no episode finished. NaN if none qualify.
double final_return(const std::vector<CurveRow>& rows);
// First timestep whose episodic_return_mean >= threshold; +inf if never.
double steps_to_threshold(const std::vector<CurveRow>& rows, double threshold);

// --- scenarios ---------------------------------------------------------------------

struct ScenarioResult {
  std::vector<RunRecord> target_runs;
  std::optional<std::filesystem::path> prior_path;
  std::optional<std::uint64_t> prior_seed;
};

// Output layout under output_dir:
//   source/seed_<N>.csv   source learning curves (rrl mode only)
//   prior.json            artifact of the best source seed
//   <mode>/seed_<N>.csv   target learning curves
// The prior is checked against the target before any target training.
using ProgressFn = std::function<void(const std::string&)>;
ScenarioResult run_scenario(const ScenarioConfig& config, const std::filesystem::path& output_dir,
                            const ProgressFn& progress = {});

// --- comparison --------------------------------------------------------------------

struct SeedComparison {
  std::uint64_t seed = 0;
  double rrl_steps = 0.0;
  double tbr_steps = 0.0;
  double rrl_final = 0.0;
  double tbr_final = 0.0;
};

struct ComparisonSummary {
  double threshold = 0.0;
  std::vector<SeedComparison> seeds;
  double rrl_median_steps = 0.0;
  double tbr_median_steps = 0.0;
  int rrl_wins = 0;
  int tbr_wins = 0;
  int ties = 0;
  double rrl_mean_final = 0.0;
  double tbr_mean_final = 0.0;
};

// Throws ArgumentError when the two sets of seeds differ.
ComparisonSummary compare_runs(const std::vector<RunRecord>& rrl, const std::vector<RunRecord>& tbr,
                               double threshold);
ComparisonSummary compare(const std::filesystem::path& rrl_dir, const std::filesystem::path& tbr_dir,
                          double threshold);
void print_comparison(const ComparisonSummary& summary, std::ostream& out);

double median(std::vector<double> values);

// --- verification suite ------------------------------------------------------------

struct CheckResult {
  std::string name;
  std::string statistic_name;
  double statistic = 0.0;
  std::string comparison;  // "<" or ">" or "=="
  double threshold = 0.0;
  bool passed = false;
};

enum class VerifyLevel { quick, full };
VerifyLevel parse_verify_level(const std::string& text);
long verify_samples(VerifyLevel level);

// Sampled estimator mean vs the enumerated gradient on the enumeration
// fixture, one pair of checks (relative L2, cosine) per baseline.
std::vector<CheckResult> check_unbiasedness(long n_samples, std::uint64_t seed);
// Exact-V baseline trace below no-baseline trace by more than 3 SE.
std::vector<CheckResult> check_variance_reduction(long n_samples, std::uint64_t seed);
std::vector<CheckResult> check_q_to_v_identity(int policies, std::uint64_t seed);
std::vector<CheckResult> check_mlp_gradient(int draws, std::uint64_t seed);
std::vector<CheckResult> check_schedules();

std::vector<CheckResult> verify(VerifyLevel level);
void print_checks(const std::vector<CheckResult>& checks, std::ostream& out);
bool all_passed(const std::vector<CheckResult>& checks);

}  // namespace rrl
