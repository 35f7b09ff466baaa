#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "rrl/decimal.hpp"
#include "rrl/dqn.hpp"
#include "rrl/error.hpp"
#include "rrl/harness.hpp"

namespace {

using namespace rrl;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitConfig = 2;

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--seeds expects comma-separated integers, got '" + text + "'");
    }
  }
  if (seeds.empty()) throw ConfigError("--seeds is empty");
  return seeds;
}

struct ScenarioFlags {
  std::string config_path;
  std::optional<int> setting;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> seeds;
  std::optional<long> total_timesteps;
  std::optional<std::string> w0;
  std::optional<std::string> w_decrement;
  std::optional<long> w_interval;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config_path, "scenario config file (YAML)");
    cmd.add_option("--setting", setting, "reincarnation setting 1-4");
    cmd.add_option("--mode", mode, "rrl or tbr");
    cmd.add_option("--seed", seed, "single target seed");
    cmd.add_option("--seeds", seeds, "comma-separated target seeds");
    cmd.add_option("--total-timesteps", total_timesteps, "source and target budgets");
    cmd.add_option("--w0", w0, "initial weaning weight");
    cmd.add_option("--w-decrement", w_decrement, "weaning decrement per interval");
    cmd.add_option("--w-interval", w_interval, "weaning interval in steps");
  }

  ScenarioConfig resolve() const {
    ScenarioConfig config;
    if (!config_path.empty()) {
      config = load_scenario(config_path);
      if (setting && *setting != config.setting) throw ConfigError("--setting disagrees with the config file");
    } else if (setting) {
      config = default_scenario(*setting);
    } else {
      throw ConfigError("pass --config or --setting");
    }
    ScenarioOverrides overrides;
    if (mode) overrides.mode = parse_run_mode(*mode);
    if (seed && seeds) throw ConfigError("--seed and --seeds are mutually exclusive");
    if (seed) overrides.seeds = std::vector<std::uint64_t>{*seed};
    if (seeds) overrides.seeds = parse_seed_list(*seeds);
    overrides.total_timesteps = total_timesteps;
    if (w0) overrides.w0 = parse_double(*w0);
    if (w_decrement) overrides.w_decrement = parse_double(*w_decrement);
    overrides.w_interval = w_interval;
    apply_overrides(config, overrides);
    config.validate();
    return config;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reincarnating RL experiment harness"};
  app.require_subcommand(1);

  ScenarioFlags run_flags;
  std::string run_out = "runs";
  CLI::App* run = app.add_subcommand("run", "train source (rrl) and target seeds for a setting");
  run_flags.attach(*run);
  run->add_option("--out", run_out, "output directory");

  std::string rrl_dir, tbr_dir;
  double threshold = 0.0;
  CLI::App* cmp = app.add_subcommand("compare", "steps-to-threshold comparison of two run directories");
  cmp->add_option("rrl_dir", rrl_dir, "directory of rrl seed_N.csv files")->required();
  cmp->add_option("tbr_dir", tbr_dir, "directory of tbr seed_N.csv files")->required();
  cmp->add_option("--threshold", threshold, "return threshold")->required();

  std::string level = "quick";
  CLI::App* ver = app.add_subcommand("verify", "run the estimator property checks");
  ver->add_option("level", level, "quick or full")->check(CLI::IsMember({"quick", "full"}));

  ScenarioFlags export_flags;
  std::string export_out = "prior.json";
  CLI::App* exp = app.add_subcommand("export-prior", "train a DQN on the source env and write its Q artifact");
  export_flags.attach(*exp);
  exp->add_option("--out", export_out, "artifact path");

  std::string inspect_path;
  CLI::App* ins = app.add_subcommand("inspect-prior", "print an artifact's header");
  ins->add_option("path", inspect_path, "artifact path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) {
      const ScenarioConfig config = run_flags.resolve();
      const ScenarioResult result =
          run_scenario(config, run_out, [](const std::string& message) { std::cerr << message << '\n'; });
      std::cout << "wrote " << result.target_runs.size() << " " << to_string(config.mode) << " runs to "
                << (std::filesystem::path(run_out) / to_string(config.mode)).string() << '\n';
    } else if (*cmp) {
      print_comparison(compare(rrl_dir, tbr_dir, threshold), std::cout);
    } else if (*ver) {
      const auto checks = verify(parse_verify_level(level));
      print_checks(checks, std::cout);
      if (!all_passed(checks)) return kExitVerifyFailed;
    } else if (*exp) {
      ScenarioConfig config = export_flags.resolve();
      if (config.source.algorithm != SourceAlgorithm::dqn) throw ConfigError("export-prior trains DQN sources only");
      const std::uint64_t seed = export_flags.seed.value_or(config.source.seeds.front());
      const DqnResult trained = dqn_train(config.source.env, config.source_dqn_config(), seed);
      const PriorArtifact artifact =
          export_prior(trained.q_network, PriorMetadata{to_string(config.source.env.env_id), "dqn", seed, ""},
                       export_out);
      std::cout << "wrote " << export_out << " (greedy return "
                << format_double(greedy_return(artifact.network(), config.source.env, 10, seed)) << ")\n";
    } else if (*ins) {
      const PriorArtifact artifact = load_prior(inspect_path);
      std::cout << "kind: " << to_string(artifact.kind()) << '\n'
                << "format_version: " << artifact.format_version() << '\n'
                << "obs_dim: " << artifact.obs_dim() << '\n'
                << "action_count: " << artifact.action_count() << '\n'
                << "layers:";
      for (int d : artifact.network().layer_dims()) std::cout << ' ' << d;
      std::cout << '\n'
                << "source_env_id: " << artifact.metadata().source_env_id << '\n'
                << "source_algorithm: " << artifact.metadata().source_algorithm << '\n'
                << "source_seed: " << artifact.metadata().source_seed << '\n'
                << "created_at: " << artifact.metadata().created_at << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}
