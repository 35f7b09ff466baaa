#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>

#include "rrl/decimal.hpp"
#include "rrl/error.hpp"
#include "rrl/harness.hpp"

namespace rrl {

namespace fs = std::filesystem;

// --- CSV ----------------------------------------------------------------------------

CurveRow to_curve_row(const TrainRow& row) {
  return {row.timestep,  row.episodic_return_mean, row.episodic_return_std, row.w_t,
          row.value_loss, row.policy_loss,          row.entropy};
}

void write_run_csv(const std::vector<CurveRow>& rows, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const CurveRow& row : rows) {
    out << row.timestep << ',' << format_double(row.episodic_return_mean) << ','
        << format_double(row.episodic_return_std) << ',' << format_double(row.w_t) << ','
        << format_double(row.value_loss) << ',' << format_double(row.policy_loss) << ','
        << format_double(row.entropy) << '\n';
  }
}

void write_run_csv(const RunRecord& record, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_run_csv(record.rows, out);
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<CurveRow> read_run_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw IoError("learning curve has an unexpected header");
  std::vector<CurveRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream cells_in(line);
    for (std::string cell; std::getline(cells_in, cell, ',');) cells.push_back(cell);
    if (cells.size() != 7) throw IoError("learning curve row must have 7 columns: " + line);
    CurveRow row;
    try {
      const double t = parse_double(cells[0]);
      row.timestep = static_cast<long>(t);
      if (static_cast<double>(row.timestep) != t) throw ArgumentError("timestep not an integer");
      row.episodic_return_mean = parse_double(cells[1]);
      row.episodic_return_std = parse_double(cells[2]);
      row.w_t = parse_double(cells[3]);
      row.value_loss = parse_double(cells[4]);
      row.policy_loss = parse_double(cells[5]);
      row.entropy = parse_double(cells[6]);
    } catch (const ArgumentError&) {
      throw IoError("unparseable learning curve row: " + line);
    }
    if (!rows.empty() && row.timestep <= rows.back().timestep) {
      throw IoError("learning curve timesteps must be strictly increasing");
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<CurveRow> read_run_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_run_csv(in);
}

std::vector<RunRecord> read_run_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a run directory: " + dir.string());
  static const std::regex pattern(R"(seed_(\d+)\.csv)");
  std::vector<RunRecord> records;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch match;
    const std::string name = entry.path().filename().string();
    if (!entry.is_regular_file() || !std::regex_match(name, match, pattern)) continue;
    RunRecord record;
    record.scenario_id = dir.filename().string();
    record.seed = std::stoull(match[1].str());
    record.rows = read_run_csv(entry.path());
    records.push_back(std::move(record));
  }
  std::sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) { return a.seed < b.seed; });
  return records;
}

double final_return(const std::vector<CurveRow>& rows) {
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t tail = std::max<std::size_t>(1, rows.size() / 10);
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = rows.size() - tail; i < rows.size(); ++i) {
    if (std::isnan(rows[i].episodic_return_mean)) continue;
    sum += rows[i].episodic_return_mean;
    ++count;
  }
  return count == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / count;
}

double steps_to_threshold(const std::vector<CurveRow>& rows, double threshold) {
  for (const CurveRow& row : rows) {
    if (row.episodic_return_mean >= threshold) return static_cast<double>(row.timestep);
  }
  return std::numeric_limits<double>::infinity();
}

// --- scenarios ----------------------------------------------------------------------

namespace {

fs::path seed_file(const fs::path& dir, std::uint64_t seed) { return dir / ("seed_" + std::to_string(seed) + ".csv"); }

void note(const ProgressFn& progress, const std::string& message) {
  if (progress) progress(message);
}

std::vector<CurveRow> to_rows(const std::vector<TrainRow>& curve) {
  std::vector<CurveRow> rows;
  rows.reserve(curve.size());
  for (const TrainRow& row : curve) rows.push_back(to_curve_row(row));
  return rows;
}

constexpr int kGreedyEvalEpisodes = 10;

// Trains every source seed and exports the best one. DQN seeds are ranked by
// greedy return on the source env, PG seeds by final training return; ties
// keep the earliest seed.
std::pair<PriorArtifact, std::uint64_t> train_source(const ScenarioConfig& config, const fs::path& source_dir,
                                                     const ProgressFn& progress) {
  std::optional<PriorArtifact> best;
  std::uint64_t best_seed = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  const std::string env_name = to_string(config.source.env.env_id);
  for (std::uint64_t seed : config.source.seeds) {
    double score = 0.0;
    std::optional<PriorArtifact> candidate;
    if (config.source.algorithm == SourceAlgorithm::dqn) {
      DqnResult result = dqn_train(config.source.env, config.source_dqn_config(), seed);
      score = greedy_return(result.q_network, config.source.env, kGreedyEvalEpisodes, derive_seed(seed, 99));
      std::ofstream out(seed_file(source_dir, seed));
      if (!out) throw IoError("cannot write source curve");
      out << "timestep,episodic_return\n";
      for (const DqnEpisode& e : result.curve) out << e.timestep << ',' << format_double(e.episodic_return) << '\n';
      candidate.emplace(PriorKind::q_function, std::move(result.q_network),
                        PriorMetadata{env_name, "dqn", seed, ""});
    } else {
      TrainResult result = train(config.source.env, config.source_train_config(), BaselineSpec{}, seed);
      RunRecord record{config.id + "-source", seed, to_rows(result.curve)};
      write_run_csv(record, seed_file(source_dir, seed));
      score = final_return(record.rows);
      if (std::isnan(score)) score = -std::numeric_limits<double>::infinity();
      candidate.emplace(PriorKind::value_function, std::move(result.value_network),
                        PriorMetadata{env_name, "ppo", seed, ""});
    }
    note(progress, "source seed " + std::to_string(seed) + " score " + format_double(score));
    if (!best || score > best_score) {
      best = std::move(candidate);
      best_score = score;
      best_seed = seed;
    }
  }
  return {std::move(*best), best_seed};
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& config, const fs::path& output_dir, const ProgressFn& progress) {
  config.validate();
  ScenarioResult result;
  fs::create_directories(output_dir);

  BaselineSpec baseline;
  if (config.mode == RunMode::rrl) {
    baseline.schedule = config.resolved_schedule();
    std::shared_ptr<const PriorArtifact> prior;
    if (config.source.prior_path) {
      prior = std::make_shared<const PriorArtifact>(load_prior(*config.source.prior_path));
      result.prior_path = *config.source.prior_path;
      result.prior_seed = prior->metadata().source_seed;
    } else {
      const fs::path source_dir = output_dir / "source";
      fs::create_directories(source_dir);
      auto [artifact, seed] = train_source(config, source_dir, progress);
      const fs::path prior_file = output_dir / "prior.json";
      save_prior(artifact, prior_file);
      prior = std::make_shared<const PriorArtifact>(load_prior(prior_file));
      result.prior_path = prior_file;
      result.prior_seed = seed;
      note(progress, "prior from source seed " + std::to_string(seed) + " written to " + prior_file.string());
    }
    // Fail before any target step if the prior cannot serve this target.
    const std::unique_ptr<Environment> probe = make_environment(config.target.env);
    const ActionSpace& space = probe->action_space();
    PriorRequirements requirements;
    requirements.obs_dim = probe->observation_dim();
    requirements.continuous_actions = !space.is_discrete();
    requirements.action_count = space.is_discrete() ? space.count : 0;
    check_compatible(*prior, requirements);
    baseline.prior = std::move(prior);
  }

  const fs::path target_dir = output_dir / to_string(config.mode);
  fs::create_directories(target_dir);
  for (std::uint64_t seed : config.target.seeds) {
    TrainResult trained = train(config.target.env, config.target_train_config(), baseline, seed);
    RunRecord record{config.id, seed, to_rows(trained.curve)};
    write_run_csv(record, seed_file(target_dir, seed));
    note(progress, to_string(config.mode) + " seed " + std::to_string(seed) + " final return " +
                       format_double(final_return(record.rows)));
    result.target_runs.push_back(std::move(record));
  }
  return result;
}

// --- comparison ---------------------------------------------------------------------

double median(std::vector<double> values) {
  if (values.empty()) throw ArgumentError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);  // +inf if either is +inf
}

ComparisonSummary compare_runs(const std::vector<RunRecord>& rrl, const std::vector<RunRecord>& tbr,
                               double threshold) {
  std::map<std::uint64_t, const RunRecord*> rrl_by_seed, tbr_by_seed;
  for (const RunRecord& r : rrl) rrl_by_seed[r.seed] = &r;
  for (const RunRecord& r : tbr) tbr_by_seed[r.seed] = &r;
  std::set<std::uint64_t> rrl_seeds, tbr_seeds;
  for (const auto& [seed, _] : rrl_by_seed) rrl_seeds.insert(seed);
  for (const auto& [seed, _] : tbr_by_seed) tbr_seeds.insert(seed);
  if (rrl_seeds != tbr_seeds || rrl_seeds.size() != rrl.size() || tbr_seeds.size() != tbr.size()) {
    throw ArgumentError("rrl and tbr runs cover different seeds");
  }
  if (rrl_seeds.empty()) throw ArgumentError("no runs to compare");

  ComparisonSummary summary;
  summary.threshold = threshold;
  std::vector<double> rrl_steps, tbr_steps;
  for (std::uint64_t seed : rrl_seeds) {
    SeedComparison row;
    row.seed = seed;
    row.rrl_steps = steps_to_threshold(rrl_by_seed[seed]->rows, threshold);
    row.tbr_steps = steps_to_threshold(tbr_by_seed[seed]->rows, threshold);
    row.rrl_final = final_return(rrl_by_seed[seed]->rows);
    row.tbr_final = final_return(tbr_by_seed[seed]->rows);
    if (row.rrl_steps < row.tbr_steps) ++summary.rrl_wins;
    else if (row.tbr_steps < row.rrl_steps) ++summary.tbr_wins;
    else ++summary.ties;
    rrl_steps.push_back(row.rrl_steps);
    tbr_steps.push_back(row.tbr_steps);
    summary.rrl_mean_final += row.rrl_final;
    summary.tbr_mean_final += row.tbr_final;
    summary.seeds.push_back(row);
  }
  summary.rrl_median_steps = median(rrl_steps);
  summary.tbr_median_steps = median(tbr_steps);
  summary.rrl_mean_final /= static_cast<double>(summary.seeds.size());
  summary.tbr_mean_final /= static_cast<double>(summary.seeds.size());
  return summary;
}

ComparisonSummary compare(const fs::path& rrl_dir, const fs::path& tbr_dir, double threshold) {
  return compare_runs(read_run_dir(rrl_dir), read_run_dir(tbr_dir), threshold);
}

void print_comparison(const ComparisonSummary& summary, std::ostream& out) {
  out << "threshold " << format_double(summary.threshold) << '\n';
  out << "seed,rrl_steps,tbr_steps,rrl_final,tbr_final\n";
  for (const SeedComparison& row : summary.seeds) {
    out << row.seed << ',' << format_double(row.rrl_steps) << ',' << format_double(row.tbr_steps) << ','
        << format_double(row.rrl_final) << ',' << format_double(row.tbr_final) << '\n';
  }
  out << "median steps-to-threshold: rrl " << format_double(summary.rrl_median_steps) << ", tbr "
      << format_double(summary.tbr_median_steps) << '\n';
  out << "wins: rrl " << summary.rrl_wins << ", tbr " << summary.tbr_wins << ", ties " << summary.ties << '\n';
  out << "mean final return: rrl " << format_double(summary.rrl_mean_final) << ", tbr "
      << format_double(summary.tbr_mean_final) << '\n';
}

}  // namespace rrl
