#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rrl/env.hpp"
#include "rrl/mlp.hpp"
#include "rrl/random.hpp"
#include "rrl/reincarnation.hpp"

namespace rrl {

struct ReplayTransition {
  Observation observation;
  int action = 0;
  double reward = 0.0;
  Observation next_observation;
  bool terminated = false;
};

// Fixed-capacity ring; once full, each push overwrites the oldest entry.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  void push(ReplayTransition transition);
  // Entry i in insertion order, 0 being the oldest retained.
  const ReplayTransition& at(std::size_t i) const;

  // Distinct indices drawn uniformly; requires count <= size().
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;  // slot overwritten by the next push once full
  std::vector<ReplayTransition> entries_;
};

struct DqnConfig {
  long total_timesteps = 100000;
  std::size_t buffer_capacity = 50000;
  int batch_size = 128;
  double gamma = 0.99;
  long target_update_interval = 500;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.5;
  long learning_starts = 1000;
  int train_frequency = 4;
  double learning_rate = 1e-3;

  void validate() const;
};

// Linear from epsilon_start at t = 0 to epsilon_end at
// t = decay_fraction * total_timesteps, constant afterwards.
double epsilon_at(const DqnConfig& config, long timestep);

struct DqnEpisode {
  long timestep = 0;  // environment steps taken when the episode ended
  double episodic_return = 0.0;
};

struct DqnResult {
  MlpModel q_network;
  std::vector<DqnEpisode> curve;
};

// Plain DQN: epsilon-greedy behaviour, uniform replay, hard target copies
// and target r + gamma (1 - terminated) max_a' Q_target(s', a'). Horizon
// truncation bootstraps. Throws UnsupportedError for continuous actions.
DqnResult dqn_train(const EnvConfig& env_config, const DqnConfig& config, std::uint64_t seed);

int greedy_action(const MlpModel& q_network, const Observation& observation);
// Mean undiscounted return of the greedy policy over `episodes` episodes.
double greedy_return(const MlpModel& q_network, const EnvConfig& env_config, int episodes, std::uint64_t seed);

PriorArtifact make_q_prior(const MlpModel& q_network, PriorMetadata metadata);
// Writes a kind "q" artifact and returns what was written.
PriorArtifact export_prior(const MlpModel& q_network, PriorMetadata metadata, const std::filesystem::path& path);

}  // namespace rrl
