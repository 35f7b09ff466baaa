#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

#include "rrl/random.hpp"

namespace rrl {

struct DenseLayer {
  Eigen::MatrixXd weights;  // (out, in)
  Eigen::VectorXd biases;   // (out)
};

class GradientBuffer;

// Activations saved by a batched forward pass; column j belongs to sample j.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // [0] is the input, back() the output
  const Eigen::MatrixXd& output() const { return activations.back(); }
};

// Feed-forward network: tanh on hidden layers, identity on the output layer.
class MlpModel {
 public:
  MlpModel() = default;
  // All parameters zero.
  explicit MlpModel(std::vector<int> layer_dims);

  // Hidden and output weights uniform in +-sqrt(1/fan_in), biases zero, the
  // output layer multiplied by output_scale.
  static MlpModel initialized(std::vector<int> layer_dims, Rng& rng, double output_scale);

  const std::vector<int>& layer_dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t parameter_count() const;
  bool all_finite() const;

  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;
  ForwardCache forward_cached(const Eigen::MatrixXd& inputs) const;

  // Gradient of output . output_gradient with respect to every parameter.
  GradientBuffer backward(const Eigen::VectorXd& input, const Eigen::VectorXd& output_gradient) const;
  // Summed over the batch columns.
  GradientBuffer backward_batch(const ForwardCache& cache, const Eigen::MatrixXd& output_gradients) const;

  bool operator==(const MlpModel& other) const;

 private:
  void check_input(Eigen::Index rows) const;

  std::vector<int> dims_;
  std::vector<DenseLayer> layers_;
};

// Parameter-shaped buffer; layer l matches the model's layer l.
class GradientBuffer {
 public:
  GradientBuffer() = default;
  static GradientBuffer zeros_like(const MlpModel& model);

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  GradientBuffer& operator+=(const GradientBuffer& other);
  GradientBuffer& operator*=(double scale);
  double squared_norm() const;
  bool all_finite() const;
  bool congruent_with(const MlpModel& model) const;

 private:
  std::vector<DenseLayer> layers_;
};

struct AdamConfig {
  double learning_rate = 2.5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  long step_count = 0;
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;

  AdamState() = default;
  AdamState(std::size_t parameter_count, AdamConfig adam_config);
  static AdamState for_model(const MlpModel& model, AdamConfig adam_config) {
    return AdamState(model.parameter_count(), adam_config);
  }
};

// Bias-corrected Adam step. Non-finite gradients throw NumericError and leave
// both the parameters and the state untouched.
void adam_update(MlpModel& model, AdamState& state, const GradientBuffer& grads);
void adam_update(Eigen::VectorXd& params, AdamState& state, const Eigen::VectorXd& grads);

}  // namespace rrl
