#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "rrl/env.hpp"
#include "rrl/mlp.hpp"
#include "rrl/policy.hpp"

namespace rrl {

enum class PriorKind { q_function, value_function };

inline constexpr int kPriorFormatVersion = 1;

struct PriorMetadata {
  std::string source_env_id;
  std::string source_algorithm;
  std::uint64_t source_seed = 0;
  std::string created_at;  // ISO-8601 UTC; filled at export when empty

  bool operator==(const PriorMetadata&) const = default;
};

// Frozen prior computation: a Q-network (outputs one value per action) or a
// value network (one output). No mutable access to the network is exposed.
class PriorArtifact {
 public:
  PriorArtifact(PriorKind kind, MlpModel network, PriorMetadata metadata);

  PriorKind kind() const { return kind_; }
  const MlpModel& network() const { return network_; }
  const PriorMetadata& metadata() const { return metadata_; }
  int obs_dim() const { return network_.input_dim(); }
  // 0 for value-function priors.
  int action_count() const { return kind_ == PriorKind::q_function ? network_.output_dim() : 0; }
  int format_version() const { return kPriorFormatVersion; }

 private:
  PriorKind kind_;
  MlpModel network_;
  PriorMetadata metadata_;
};

std::string to_string(PriorKind kind);

// Text document (JSON) with shortest round-trip decimals, so a
// save/load cycle reproduces every parameter bit for bit.
std::string serialize_prior(const PriorArtifact& artifact);
PriorArtifact parse_prior(const std::string& text);
void save_prior(const PriorArtifact& artifact, const std::filesystem::path& path);
PriorArtifact load_prior(const std::filesystem::path& path);

// What a target task needs from a prior. Checked once, at load time.
struct PriorRequirements {
  std::optional<PriorKind> kind;
  int obs_dim = 0;
  int action_count = 0;  // 0 when the target action space is continuous
  bool continuous_actions = false;
};

void check_compatible(const PriorArtifact& artifact, const PriorRequirements& requirements);
PriorArtifact load_prior(const std::filesystem::path& path, const PriorRequirements& requirements);

struct WeaningSchedule {
  enum class Kind { fixed, step_decay };

  Kind kind = Kind::fixed;
  double w0 = 0.0;
  double decrement = 0.0;
  long interval_steps = 1;

  static WeaningSchedule fixed(double w);
  static WeaningSchedule step_decay(double w0, double decrement, long interval_steps);
  void validate() const;

  bool operator==(const WeaningSchedule&) const = default;
};

// fixed: w0.  step_decay: max(0, w0 - decrement * floor(t / interval)).
// When w0 and decrement are short decimals the subtraction is carried out in
// scaled integers, so (0.5, 0.1) yields exactly 0.4, 0.3, 0.2, 0.1, 0.
double weaning_weight(const WeaningSchedule& schedule, long timestep);

struct BaselineSpec {
  std::shared_ptr<const PriorArtifact> prior;  // null: tabula rasa
  WeaningSchedule schedule;

  // Zero whenever no prior is attached.
  double effective_weight(long timestep) const { return prior ? weaning_weight(schedule, timestep) : 0.0; }
};

// sum_a pi(a|s) Q(s,a) with the frozen Q-network.
double q_to_value(const PriorArtifact& prior, const Eigen::VectorXd& action_probabilities,
                  const Observation& observation);
double q_to_value(const PriorArtifact& prior, const Policy& policy, const Observation& observation);
// Frozen value network output.
double prior_value(const PriorArtifact& prior, const Observation& observation);

// b(s) = (1 - w_t) V_current(s) + w_t V_prior(s). Returns V_current(s)
// exactly when w_t is 0 (including when no prior is attached).
double combined_baseline(const BaselineSpec& spec, const MlpModel& current_value, const Policy& policy,
                         const Observation& observation, long timestep);
double combined_baseline(const BaselineSpec& spec, const MlpModel& current_value,
                         const Eigen::VectorXd& action_probabilities, const Observation& observation,
                         long timestep);
// Batched form over observation columns. action_probabilities holds one
// column per observation and may be empty for value-function priors.
Eigen::VectorXd combined_baselines(const BaselineSpec& spec, const MlpModel& current_value,
                                   const Eigen::MatrixXd& observations,
                                   const Eigen::MatrixXd& action_probabilities, long timestep);

}  // namespace rrl
