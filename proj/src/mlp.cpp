#include "rrl/mlp.hpp"

#include <cmath>
#include <span>

#include "rrl/error.hpp"

namespace rrl {

MlpModel::MlpModel(std::vector<int> layer_dims) : dims_(std::move(layer_dims)) {
  if (dims_.size() < 2) throw ArgumentError("an MLP needs at least input and output dims");
  for (int d : dims_) {
    if (d < 1) throw ArgumentError("layer dims must be positive");
  }
  layers_.reserve(dims_.size() - 1);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    layers_.push_back({Eigen::MatrixXd::Zero(dims_[l + 1], dims_[l]), Eigen::VectorXd::Zero(dims_[l + 1])});
  }
}

MlpModel MlpModel::initialized(std::vector<int> layer_dims, Rng& rng, double output_scale) {
  MlpModel model(std::move(layer_dims));
  for (std::size_t l = 0; l < model.layers_.size(); ++l) {
    auto& w = model.layers_[l].weights;
    const double bound = std::sqrt(1.0 / static_cast<double>(w.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    // Row-major fill so the draw order matches the serialized layout.
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    }
    if (l + 1 == model.layers_.size()) w *= output_scale;
  }
  return model;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers_) count += layer.weights.size() + layer.biases.size();
  return count;
}

bool MlpModel::all_finite() const {
  for (const auto& layer : layers_) {
    if (!layer.weights.allFinite() || !layer.biases.allFinite()) return false;
  }
  return true;
}

void MlpModel::check_input(Eigen::Index rows) const {
  if (layers_.empty()) throw ArgumentError("forward on an empty model");
  if (rows != input_dim()) {
    throw ArgumentError("input length " + std::to_string(rows) + " does not match model input " +
                        std::to_string(input_dim()));
  }
}

Eigen::VectorXd MlpModel::forward(const Eigen::VectorXd& input) const {
  return forward_batch(input);
}

Eigen::MatrixXd MlpModel::forward_batch(const Eigen::MatrixXd& inputs) const {
  check_input(inputs.rows());
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weights * a;
    z.colwise() += layers_[l].biases;
    if (l + 1 < layers_.size()) {
      a = z.array().tanh().matrix();
    } else {
      a = std::move(z);
    }
  }
  return a;
}

ForwardCache MlpModel::forward_cached(const Eigen::MatrixXd& inputs) const {
  check_input(inputs.rows());
  ForwardCache cache;
  cache.activations.reserve(layers_.size() + 1);
  cache.activations.push_back(inputs);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weights * cache.activations.back();
    z.colwise() += layers_[l].biases;
    if (l + 1 < layers_.size()) z = z.array().tanh().matrix();
    cache.activations.push_back(std::move(z));
  }
  return cache;
}

GradientBuffer MlpModel::backward(const Eigen::VectorXd& input, const Eigen::VectorXd& output_gradient) const {
  return backward_batch(forward_cached(input), output_gradient);
}

GradientBuffer MlpModel::backward_batch(const ForwardCache& cache, const Eigen::MatrixXd& output_gradients) const {
  if (cache.activations.size() != layers_.size() + 1) throw ArgumentError("forward cache does not match model");
  if (output_gradients.rows() != output_dim() || output_gradients.cols() != cache.output().cols()) {
    throw ArgumentError("output gradient shape does not match model output");
  }
  GradientBuffer grads = GradientBuffer::zeros_like(*this);
  Eigen::MatrixXd delta = output_gradients;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Eigen::MatrixXd& below = cache.activations[l];
    grads.layers()[l].weights.noalias() = delta * below.transpose();
    grads.layers()[l].biases = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = layers_[l].weights.transpose() * delta;
      delta = back.array() * (1.0 - below.array().square());
    }
  }
  return grads;
}

bool MlpModel::operator==(const MlpModel& other) const {
  if (dims_ != other.dims_) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].weights != other.layers_[l].weights || layers_[l].biases != other.layers_[l].biases) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

GradientBuffer GradientBuffer::zeros_like(const MlpModel& model) {
  GradientBuffer buffer;
  buffer.layers_.reserve(model.layers().size());
  for (const auto& layer : model.layers()) {
    buffer.layers_.push_back({Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()),
                              Eigen::VectorXd::Zero(layer.biases.size())});
  }
  return buffer;
}

GradientBuffer& GradientBuffer::operator+=(const GradientBuffer& other) {
  if (layers_.size() != other.layers_.size()) throw ArgumentError("gradient buffers are not congruent");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].weights += other.layers_[l].weights;
    layers_[l].biases += other.layers_[l].biases;
  }
  return *this;
}

GradientBuffer& GradientBuffer::operator*=(double scale) {
  for (auto& layer : layers_) {
    layer.weights *= scale;
    layer.biases *= scale;
  }
  return *this;
}

double GradientBuffer::squared_norm() const {
  double total = 0.0;
  for (const auto& layer : layers_) total += layer.weights.squaredNorm() + layer.biases.squaredNorm();
  return total;
}

bool GradientBuffer::all_finite() const {
  for (const auto& layer : layers_) {
    if (!layer.weights.allFinite() || !layer.biases.allFinite()) return false;
  }
  return true;
}

bool GradientBuffer::congruent_with(const MlpModel& model) const {
  if (layers_.size() != model.layers().size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& mine = layers_[l];
    const auto& theirs = model.layers()[l];
    if (mine.weights.rows() != theirs.weights.rows() || mine.weights.cols() != theirs.weights.cols() ||
        mine.biases.size() != theirs.biases.size()) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

AdamState::AdamState(std::size_t parameter_count, AdamConfig adam_config)
    : config(adam_config),
      first_moment(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameter_count))),
      second_moment(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameter_count))) {
  if (!(config.learning_rate > 0.0)) throw ArgumentError("learning rate must be positive");
}

namespace {

// Applies one Adam step to a parameter segment located at `offset` in the
// flattened moment buffers. step_count must already be incremented.
void adam_segment(AdamState& state, std::span<double> params, std::span<const double> grads,
                  Eigen::Index offset) {
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[offset + static_cast<Eigen::Index>(i)];
    double& v = state.second_moment[offset + static_cast<Eigen::Index>(i)];
    m = c.beta1 * m + (1.0 - c.beta1) * grads[i];
    v = c.beta2 * v + (1.0 - c.beta2) * grads[i] * grads[i];
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace

void adam_update(MlpModel& model, AdamState& state, const GradientBuffer& grads) {
  if (!grads.congruent_with(model) ||
      state.first_moment.size() != static_cast<Eigen::Index>(model.parameter_count())) {
    throw ArgumentError("adam_update: gradient/state shape does not match model");
  }
  if (!grads.all_finite()) throw NumericError("adam_update: non-finite gradient");
  ++state.step_count;
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    auto& layer = model.layers()[l];
    const auto& g = grads.layers()[l];
    // Weights are column-major in memory; the flat moment layout only needs
    // to be consistent between calls.
    adam_segment(state, {layer.weights.data(), static_cast<std::size_t>(layer.weights.size())},
                 {g.weights.data(), static_cast<std::size_t>(g.weights.size())}, offset);
    offset += layer.weights.size();
    adam_segment(state, {layer.biases.data(), static_cast<std::size_t>(layer.biases.size())},
                 {g.biases.data(), static_cast<std::size_t>(g.biases.size())}, offset);
    offset += layer.biases.size();
  }
}

void adam_update(Eigen::VectorXd& params, AdamState& state, const Eigen::VectorXd& grads) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size()) {
    throw ArgumentError("adam_update: gradient/state shape does not match parameters");
  }
  if (!grads.allFinite()) throw NumericError("adam_update: non-finite gradient");
  ++state.step_count;
  adam_segment(state, {params.data(), static_cast<std::size_t>(params.size())},
               {grads.data(), static_cast<std::size_t>(grads.size())}, 0);
}

}  // namespace rrl
