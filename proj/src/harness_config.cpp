#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

#include "rrl/error.hpp"
#include "rrl/harness.hpp"

namespace rrl {

std::string to_string(SourceAlgorithm algorithm) { return algorithm == SourceAlgorithm::dqn ? "dqn" : "pg"; }
std::string to_string(RunMode mode) { return mode == RunMode::rrl ? "rrl" : "tbr"; }

SourceAlgorithm parse_source_algorithm(const std::string& text) {
  if (text == "dqn") return SourceAlgorithm::dqn;
  if (text == "pg") return SourceAlgorithm::pg;
  throw ConfigError("unknown source algorithm '" + text + "'");
}

RunMode parse_run_mode(const std::string& text) {
  if (text == "rrl") return RunMode::rrl;
  if (text == "tbr") return RunMode::tbr;
  throw ConfigError("unknown mode '" + text + "' (expected rrl or tbr)");
}

namespace {

std::vector<std::uint64_t> seed_range(int count) {
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) seeds[i] = static_cast<std::uint64_t>(i);
  return seeds;
}

// Equal up to the fields a setting is allowed to change.
bool same_except_wind(EnvConfig a, EnvConfig b) {
  b.wind_enabled = a.wind_enabled;
  b.wind_strength = a.wind_strength;
  b.seed = a.seed;
  return a == b;
}

bool same_except_reward(EnvConfig a, EnvConfig b) {
  b.reward_variant = a.reward_variant;
  b.seed = a.seed;
  return a == b;
}

bool same_env(EnvConfig a, EnvConfig b) {
  b.seed = a.seed;
  return a == b;
}

}  // namespace

ScenarioConfig default_scenario(int setting) {
  ScenarioConfig config;
  config.setting = setting;
  config.id = "setting" + std::to_string(setting);
  config.source.seeds = seed_range(3);
  config.target.seeds = seed_range(10);
  switch (setting) {
    case 1:
      config.source.env = default_env_config(EnvId::windy_grid);
      config.source.algorithm = SourceAlgorithm::dqn;
      config.target.env = config.source.env;
      config.schedule = WeaningSchedule{WeaningSchedule::Kind::fixed, 0.9, 0.0, 1};
      break;
    case 2:
      config.source.env = default_env_config(EnvId::windy_grid);
      config.source.algorithm = SourceAlgorithm::dqn;
      config.target.env = config.source.env;
      config.target.env.wind_enabled = true;
      config.target.env.wind_strength = 0.3;
      config.schedule = WeaningSchedule{WeaningSchedule::Kind::step_decay, 0.5, 0.1, 0};
      break;
    case 3:
    case 4:
      config.source.env = default_env_config(EnvId::goal_world);
      config.source.env.continuous_actions = true;
      config.source.env.reward_variant = RewardVariant::reach;
      config.source.algorithm = SourceAlgorithm::pg;
      config.target.env = config.source.env;
      if (setting == 3) config.target.env.reward_variant = RewardVariant::reach_fast;
      config.schedule = WeaningSchedule{WeaningSchedule::Kind::step_decay, 0.5, 0.1, 0};
      break;
    default:
      throw ConfigError("setting must be 1, 2, 3 or 4 (got " + std::to_string(setting) + ")");
  }
  return config;
}

WeaningSchedule ScenarioConfig::resolved_schedule() const {
  WeaningSchedule resolved = schedule;
  if (resolved.interval_steps == 0) resolved.interval_steps = std::max(1L, target.total_timesteps / 10);
  return resolved;
}

TrainConfig ScenarioConfig::target_train_config() const {
  TrainConfig train = ppo;
  train.total_timesteps = target.total_timesteps;
  return train;
}

TrainConfig ScenarioConfig::source_train_config() const {
  TrainConfig train = ppo;
  train.total_timesteps = source.total_timesteps;
  return train;
}

DqnConfig ScenarioConfig::source_dqn_config() const {
  DqnConfig config = dqn;
  config.total_timesteps = source.total_timesteps;
  return config;
}

void ScenarioConfig::validate() const {
  if (setting < 1 || setting > 4) throw ConfigError("setting must be 1, 2, 3 or 4");
  if (id.empty()) throw ConfigError("scenario id must not be empty");
  source.env.validate();
  target.env.validate();
  if (target.seeds.empty()) throw ConfigError("target.seeds must not be empty");
  if (std::set<std::uint64_t>(target.seeds.begin(), target.seeds.end()).size() != target.seeds.size()) {
    throw ConfigError("target.seeds contains duplicates");
  }
  if (source.seeds.empty() && !source.prior_path) throw ConfigError("source.seeds must not be empty");
  if (target.total_timesteps < 1 || source.total_timesteps < 1) throw ConfigError("budgets must be positive");
  target_train_config().validate();
  source_train_config().validate();
  source_dqn_config().validate();
  resolved_schedule().validate();

  const std::string where = "setting " + std::to_string(setting) + ": ";
  const bool wants_dqn = setting <= 2;
  if ((source.algorithm == SourceAlgorithm::dqn) != wants_dqn) {
    throw ConfigError(where + "source algorithm must be " + std::string(wants_dqn ? "dqn" : "pg"));
  }
  const auto want_kind = setting == 1 ? WeaningSchedule::Kind::fixed : WeaningSchedule::Kind::step_decay;
  if (schedule.kind != want_kind) {
    throw ConfigError(where + "schedule must be " + std::string(setting == 1 ? "fixed" : "step_decay"));
  }
  switch (setting) {
    case 1:
    case 4:
      if (!same_env(source.env, target.env)) throw ConfigError(where + "source and target env must match");
      break;
    case 2:
      if (!same_except_wind(source.env, target.env) || same_env(source.env, target.env)) {
        throw ConfigError(where + "source and target env must differ in wind only");
      }
      break;
    case 3:
      if (!same_except_reward(source.env, target.env) || same_env(source.env, target.env)) {
        throw ConfigError(where + "source and target env must differ in reward_variant only");
      }
      break;
  }
  if (source.algorithm == SourceAlgorithm::dqn && source.env.env_id == EnvId::goal_world &&
      source.env.continuous_actions) {
    throw ConfigError(where + "dqn source needs discrete actions");
  }
}

void apply_overrides(ScenarioConfig& config, const ScenarioOverrides& overrides) {
  if (overrides.mode) config.mode = *overrides.mode;
  if (overrides.seeds) config.target.seeds = *overrides.seeds;
  if (overrides.total_timesteps) {
    config.target.total_timesteps = *overrides.total_timesteps;
    config.source.total_timesteps = *overrides.total_timesteps;
  }
  if (overrides.w0) config.schedule.w0 = *overrides.w0;
  if (overrides.w_decrement) config.schedule.decrement = *overrides.w_decrement;
  if (overrides.w_interval) config.schedule.interval_steps = *overrides.w_interval;
}

// --- YAML -------------------------------------------------------------------------

namespace {

void reject_unknown(const YAML::Node& node, const std::set<std::string>& allowed, const std::string& where) {
  if (!node.IsMap()) throw ConfigError(where + " must be a mapping");
  for (const auto& item : node) {
    const std::string key = item.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where) {
  const YAML::Node value = node[key];
  if (!value) return;
  try {
    out = value.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + where);
  }
}

EnvConfig read_env(const YAML::Node& node, EnvConfig env, const std::string& where) {
  reject_unknown(node, {"id", "wind_enabled", "wind_strength", "reward_variant", "continuous_actions", "horizon", "seed"},
                 where);
  if (node["id"]) {
    const EnvId id = parse_env_id(node["id"].as<std::string>());
    if (id != env.env_id) env = default_env_config(id);
  }
  read(node, "wind_enabled", env.wind_enabled, where);
  read(node, "wind_strength", env.wind_strength, where);
  if (node["reward_variant"]) env.reward_variant = parse_reward_variant(node["reward_variant"].as<std::string>());
  read(node, "continuous_actions", env.continuous_actions, where);
  read(node, "horizon", env.horizon, where);
  read(node, "seed", env.seed, where);
  return env;
}

void read_ppo(const YAML::Node& node, TrainConfig& ppo) {
  const std::string where = "ppo";
  reject_unknown(node,
                 {"num_envs", "steps_per_rollout", "minibatch_size", "update_epochs", "clip_coefficient", "gamma",
                  "entropy_coefficient", "value_coefficient", "max_grad_norm", "advantage_normalization",
                  "learning_rate", "rpo_alpha", "gae_lambda"},
                 where);
  read(node, "num_envs", ppo.num_envs, where);
  read(node, "steps_per_rollout", ppo.steps_per_rollout, where);
  read(node, "minibatch_size", ppo.minibatch_size, where);
  read(node, "update_epochs", ppo.update_epochs, where);
  read(node, "clip_coefficient", ppo.clip_coefficient, where);
  read(node, "gamma", ppo.gamma, where);
  read(node, "entropy_coefficient", ppo.entropy_coefficient, where);
  read(node, "value_coefficient", ppo.value_coefficient, where);
  read(node, "max_grad_norm", ppo.max_grad_norm, where);
  read(node, "advantage_normalization", ppo.advantage_normalization, where);
  read(node, "learning_rate", ppo.learning_rate, where);
  read(node, "rpo_alpha", ppo.rpo_alpha, where);
  if (node["gae_lambda"]) {
    double lambda = 0.0;
    read(node, "gae_lambda", lambda, where);
    ppo.gae_lambda = lambda;
  }
}

void read_dqn(const YAML::Node& node, DqnConfig& dqn) {
  const std::string where = "dqn";
  reject_unknown(node,
                 {"buffer_capacity", "batch_size", "gamma", "target_update_interval", "epsilon_start", "epsilon_end",
                  "epsilon_decay_fraction", "learning_starts", "train_frequency", "learning_rate"},
                 where);
  read(node, "buffer_capacity", dqn.buffer_capacity, where);
  read(node, "batch_size", dqn.batch_size, where);
  read(node, "gamma", dqn.gamma, where);
  read(node, "target_update_interval", dqn.target_update_interval, where);
  read(node, "epsilon_start", dqn.epsilon_start, where);
  read(node, "epsilon_end", dqn.epsilon_end, where);
  read(node, "epsilon_decay_fraction", dqn.epsilon_decay_fraction, where);
  read(node, "learning_starts", dqn.learning_starts, where);
  read(node, "train_frequency", dqn.train_frequency, where);
  read(node, "learning_rate", dqn.learning_rate, where);
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  if (!root || root.IsNull()) throw ConfigError("empty config");
  reject_unknown(root, {"setting", "id", "mode", "source", "target", "schedule", "ppo", "dqn"}, "config");
  if (!root["setting"]) throw ConfigError("config must name a setting");
  int setting = 0;
  read(root, "setting", setting, "config");
  ScenarioConfig config = default_scenario(setting);
  read(root, "id", config.id, "config");
  if (root["mode"]) config.mode = parse_run_mode(root["mode"].as<std::string>());

  if (const YAML::Node source = root["source"]) {
    reject_unknown(source, {"env", "algorithm", "seeds", "total_timesteps", "prior"}, "source");
    if (source["env"]) config.source.env = read_env(source["env"], config.source.env, "source.env");
    if (source["algorithm"]) config.source.algorithm = parse_source_algorithm(source["algorithm"].as<std::string>());
    read(source, "seeds", config.source.seeds, "source");
    read(source, "total_timesteps", config.source.total_timesteps, "source");
    if (source["prior"]) config.source.prior_path = source["prior"].as<std::string>();
  }
  if (const YAML::Node target = root["target"]) {
    reject_unknown(target, {"env", "seeds", "total_timesteps"}, "target");
    if (target["env"]) config.target.env = read_env(target["env"], config.target.env, "target.env");
    read(target, "seeds", config.target.seeds, "target");
    read(target, "total_timesteps", config.target.total_timesteps, "target");
  }
  if (const YAML::Node schedule = root["schedule"]) {
    reject_unknown(schedule, {"kind", "w0", "decrement", "interval"}, "schedule");
    if (schedule["kind"]) {
      const std::string kind = schedule["kind"].as<std::string>();
      if (kind == "fixed") config.schedule.kind = WeaningSchedule::Kind::fixed;
      else if (kind == "step_decay") config.schedule.kind = WeaningSchedule::Kind::step_decay;
      else throw ConfigError("unknown schedule kind '" + kind + "'");
    }
    read(schedule, "w0", config.schedule.w0, "schedule");
    read(schedule, "decrement", config.schedule.decrement, "schedule");
    read(schedule, "interval", config.schedule.interval_steps, "schedule");
  }
  if (root["ppo"]) read_ppo(root["ppo"], config.ppo);
  if (root["dqn"]) read_dqn(root["dqn"], config.dqn);
  config.validate();
  return config;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str());
}

}  // namespace rrl
