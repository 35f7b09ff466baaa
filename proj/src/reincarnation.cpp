#include "rrl/reincarnation.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#include "rrl/decimal.hpp"
#include "rrl/error.hpp"

namespace rrl {

PriorArtifact::PriorArtifact(PriorKind kind, MlpModel network, PriorMetadata metadata)
    : kind_(kind), network_(std::move(network)), metadata_(std::move(metadata)) {
  if (network_.layers().empty()) throw ArgumentError("prior artifact needs a non-empty network");
  if (kind_ == PriorKind::value_function && network_.output_dim() != 1) {
    throw ArgumentError("value-function prior must have exactly one output");
  }
  if (kind_ == PriorKind::q_function && network_.output_dim() < 2) {
    throw ArgumentError("q-function prior needs one output per action (at least 2)");
  }
  if (!network_.all_finite()) throw NumericError("prior network has non-finite parameters");
}

std::string to_string(PriorKind kind) { return kind == PriorKind::q_function ? "q" : "v"; }

// --- serialization ------------------------------------------------------------

namespace {

std::string iso_utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

void append_list(std::ostringstream& out, auto begin, auto end) {
  out << '[';
  for (auto it = begin; it != end; ++it) {
    if (it != begin) out << ',';
    // "-0" would be read back as the integer 0 and lose its sign.
    if (*it == 0.0 && std::signbit(*it)) {
      out << "-0.0";
    } else {
      out << format_double(*it);
    }
  }
  out << ']';
}

}  // namespace

std::string serialize_prior(const PriorArtifact& artifact) {
  PriorMetadata meta = artifact.metadata();
  if (meta.created_at.empty()) meta.created_at = iso_utc_now();

  // Numbers are written by hand so every decimal is the shortest round-trip
  // form; the strings go through the JSON library for escaping.
  std::ostringstream out;
  out << "{\n";
  out << "  \"format_version\": " << artifact.format_version() << ",\n";
  out << "  \"kind\": " << nlohmann::json(to_string(artifact.kind())).dump() << ",\n";
  out << "  \"obs_dim\": " << artifact.obs_dim() << ",\n";
  out << "  \"action_count\": ";
  if (artifact.kind() == PriorKind::q_function) {
    out << artifact.action_count();
  } else {
    out << "null";
  }
  out << ",\n";
  out << "  \"activation\": \"tanh\",\n";
  out << "  \"layers\": [\n";
  const auto& layers = artifact.network().layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& w = layers[l].weights;
    std::vector<double> row_major;
    row_major.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) row_major.push_back(w(r, c));
    }
    out << "    {\"rows\": " << w.rows() << ", \"cols\": " << w.cols() << ", \"weights\": ";
    append_list(out, row_major.begin(), row_major.end());
    out << ", \"biases\": ";
    const auto& b = layers[l].biases;
    append_list(out, b.data(), b.data() + b.size());
    out << '}' << (l + 1 < layers.size() ? "," : "") << '\n';
  }
  out << "  ],\n";
  nlohmann::json metadata = {{"source_env_id", meta.source_env_id},
                             {"source_algorithm", meta.source_algorithm},
                             {"source_seed", meta.source_seed},
                             {"created_at", meta.created_at}};
  out << "  \"metadata\": " << metadata.dump() << "\n";
  out << "}\n";
  return out.str();
}

PriorArtifact parse_prior(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("prior artifact is not valid JSON: ") + e.what());
  }
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kPriorFormatVersion) {
      throw CompatibilityError("unsupported prior format_version " + std::to_string(version));
    }
    const std::string kind_text = doc.at("kind").get<std::string>();
    PriorKind kind;
    if (kind_text == "q") {
      kind = PriorKind::q_function;
    } else if (kind_text == "v") {
      kind = PriorKind::value_function;
    } else {
      throw IoError("unknown prior kind '" + kind_text + "'");
    }
    if (doc.at("activation").get<std::string>() != "tanh") throw IoError("only tanh activation is supported");

    const auto& layers = doc.at("layers");
    if (!layers.is_array() || layers.empty()) throw IoError("prior artifact has no layers");
    std::vector<int> dims;
    dims.push_back(layers.front().at("cols").get<int>());
    for (const auto& layer : layers) dims.push_back(layer.at("rows").get<int>());
    MlpModel network(dims);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& layer = layers[l];
      const int rows = layer.at("rows").get<int>();
      const int cols = layer.at("cols").get<int>();
      if (cols != dims[l]) throw IoError("layer input width does not chain with the previous layer");
      const auto weights = layer.at("weights").get<std::vector<double>>();
      const auto biases = layer.at("biases").get<std::vector<double>>();
      if (weights.size() != static_cast<std::size_t>(rows) * cols || biases.size() != static_cast<std::size_t>(rows)) {
        throw IoError("layer parameter count does not match its shape");
      }
      auto& dest = network.layers()[l];
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) dest.weights(r, c) = weights[static_cast<std::size_t>(r) * cols + c];
        dest.biases[r] = biases[static_cast<std::size_t>(r)];
      }
    }

    if (doc.at("obs_dim").get<int>() != network.input_dim()) throw IoError("obs_dim disagrees with the network");
    if (kind == PriorKind::q_function && doc.at("action_count").get<int>() != network.output_dim()) {
      throw IoError("action_count disagrees with the network");
    }

    const auto& meta_doc = doc.at("metadata");
    PriorMetadata meta;
    meta.source_env_id = meta_doc.at("source_env_id").get<std::string>();
    meta.source_algorithm = meta_doc.at("source_algorithm").get<std::string>();
    meta.source_seed = meta_doc.at("source_seed").get<std::uint64_t>();
    meta.created_at = meta_doc.at("created_at").get<std::string>();
    try {
      return PriorArtifact(kind, std::move(network), std::move(meta));
    } catch (const ArgumentError& e) {
      throw IoError(e.what());
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed prior artifact: ") + e.what());
  }
}

void save_prior(const PriorArtifact& artifact, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << serialize_prior(artifact);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

PriorArtifact load_prior(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open prior artifact '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_prior(text.str());
}

void check_compatible(const PriorArtifact& artifact, const PriorRequirements& requirements) {
  if (requirements.kind && *requirements.kind != artifact.kind()) {
    throw CompatibilityError("prior kind '" + to_string(artifact.kind()) + "' where '" +
                             to_string(*requirements.kind) + "' is required");
  }
  if (artifact.kind() == PriorKind::q_function && requirements.continuous_actions) {
    throw UnsupportedError("Q-function priors are only supported for discrete action spaces");
  }
  if (artifact.obs_dim() != requirements.obs_dim) {
    throw CompatibilityError("prior obs_dim " + std::to_string(artifact.obs_dim()) + " but target has " +
                             std::to_string(requirements.obs_dim));
  }
  if (artifact.kind() == PriorKind::q_function && artifact.action_count() != requirements.action_count) {
    throw CompatibilityError("prior action_count " + std::to_string(artifact.action_count()) +
                             " but target has " + std::to_string(requirements.action_count));
  }
}

PriorArtifact load_prior(const std::filesystem::path& path, const PriorRequirements& requirements) {
  PriorArtifact artifact = load_prior(path);
  check_compatible(artifact, requirements);
  return artifact;
}

// --- weaning schedule -----------------------------------------------------------

WeaningSchedule WeaningSchedule::fixed(double w) {
  WeaningSchedule schedule;
  schedule.kind = Kind::fixed;
  schedule.w0 = w;
  schedule.validate();
  return schedule;
}

WeaningSchedule WeaningSchedule::step_decay(double w0, double decrement, long interval_steps) {
  WeaningSchedule schedule;
  schedule.kind = Kind::step_decay;
  schedule.w0 = w0;
  schedule.decrement = decrement;
  schedule.interval_steps = interval_steps;
  schedule.validate();
  return schedule;
}

void WeaningSchedule::validate() const {
  if (!(w0 >= 0.0 && w0 <= 1.0)) throw ConfigError("weaning w0 must lie in [0,1]");
  if (kind == Kind::step_decay) {
    if (!(decrement >= 0.0) || !std::isfinite(decrement)) throw ConfigError("weaning decrement must be >= 0");
    if (interval_steps < 1) throw ConfigError("weaning interval_steps must be positive");
  }
}

namespace {

// Smallest power of ten that turns both values into exact integers, if any.
std::optional<int> common_decimal_scale(double a, double b) {
  double scale = 1.0;
  for (int digits = 0; digits <= 12; ++digits, scale *= 10.0) {
    const double sa = std::round(a * scale);
    const double sb = std::round(b * scale);
    if (sa / scale == a && sb / scale == b) return digits;
  }
  return std::nullopt;
}

}  // namespace

double weaning_weight(const WeaningSchedule& schedule, long timestep) {
  if (schedule.kind == WeaningSchedule::Kind::fixed) return schedule.w0;
  const long steps = std::max(0L, timestep) / schedule.interval_steps;
  if (schedule.decrement == 0.0 || steps == 0) return schedule.w0;
  if (const auto digits = common_decimal_scale(schedule.w0, schedule.decrement)) {
    const double scale = std::pow(10.0, *digits);
    const long long start = std::llround(schedule.w0 * scale);
    const long long step = std::llround(schedule.decrement * scale);
    if (step > 0 && steps >= start / step + 1) return 0.0;
    const long long remaining = start - step * steps;
    return remaining <= 0 ? 0.0 : static_cast<double>(remaining) / scale;
  }
  return std::max(0.0, schedule.w0 - schedule.decrement * static_cast<double>(steps));
}

// --- value estimates ------------------------------------------------------------

double q_to_value(const PriorArtifact& prior, const Eigen::VectorXd& action_probabilities,
                  const Observation& observation) {
  if (prior.kind() != PriorKind::q_function) throw CompatibilityError("q_to_value needs a Q-function prior");
  if (observation.size() != prior.obs_dim()) throw CompatibilityError("observation dim does not match prior");
  if (action_probabilities.size() != prior.action_count()) {
    throw CompatibilityError("policy action count does not match prior");
  }
  return action_probabilities.dot(prior.network().forward(observation));
}

double q_to_value(const PriorArtifact& prior, const Policy& policy, const Observation& observation) {
  if (!policy.is_categorical()) {
    throw UnsupportedError("Q-to-value conversion is only defined for discrete action spaces");
  }
  if (policy.categorical().action_count() != prior.action_count()) {
    throw CompatibilityError("policy action count does not match prior");
  }
  if (observation.size() != prior.obs_dim()) throw CompatibilityError("observation dim does not match prior");
  return q_to_value(prior, policy.categorical().probabilities(observation), observation);
}

double prior_value(const PriorArtifact& prior, const Observation& observation) {
  if (prior.kind() != PriorKind::value_function) {
    throw CompatibilityError("prior_value needs a value-function prior");
  }
  if (observation.size() != prior.obs_dim()) throw CompatibilityError("observation dim does not match prior");
  return prior.network().forward(observation)[0];
}

double combined_baseline(const BaselineSpec& spec, const MlpModel& current_value,
                         const Eigen::VectorXd& action_probabilities, const Observation& observation,
                         long timestep) {
  const double current = current_value.forward(observation)[0];
  const double w = spec.effective_weight(timestep);
  if (w == 0.0) return current;
  const double prior = spec.prior->kind() == PriorKind::q_function
                           ? q_to_value(*spec.prior, action_probabilities, observation)
                           : prior_value(*spec.prior, observation);
  return (1.0 - w) * current + w * prior;
}

double combined_baseline(const BaselineSpec& spec, const MlpModel& current_value, const Policy& policy,
                         const Observation& observation, long timestep) {
  if (spec.prior && spec.prior->kind() == PriorKind::q_function) {
    if (!policy.is_categorical()) {
      throw UnsupportedError("Q-to-value conversion is only defined for discrete action spaces");
    }
    return combined_baseline(spec, current_value, policy.categorical().probabilities(observation), observation,
                             timestep);
  }
  return combined_baseline(spec, current_value, Eigen::VectorXd(), observation, timestep);
}

Eigen::VectorXd combined_baselines(const BaselineSpec& spec, const MlpModel& current_value,
                                   const Eigen::MatrixXd& observations,
                                   const Eigen::MatrixXd& action_probabilities, long timestep) {
  Eigen::VectorXd current = current_value.forward_batch(observations).row(0).transpose();
  const double w = spec.effective_weight(timestep);
  if (w == 0.0) return current;
  const PriorArtifact& prior = *spec.prior;
  if (observations.rows() != prior.obs_dim()) throw CompatibilityError("observation dim does not match prior");
  Eigen::VectorXd estimate;
  if (prior.kind() == PriorKind::q_function) {
    if (action_probabilities.rows() != prior.action_count() || action_probabilities.cols() != observations.cols()) {
      throw CompatibilityError("action probabilities do not match the Q-function prior");
    }
    const Eigen::MatrixXd q = prior.network().forward_batch(observations);
    estimate = (q.array() * action_probabilities.array()).colwise().sum().transpose();
  } else {
    estimate = prior.network().forward_batch(observations).row(0).transpose();
  }
  return (1.0 - w) * current.array() + w * estimate.array();
}

}  // namespace rrl
