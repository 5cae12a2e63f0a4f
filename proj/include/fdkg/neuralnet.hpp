#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace fdkg::nn {

using Matrix = Eigen::MatrixXd;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using WeightMap = Eigen::Map<RowMajorMatrix>;
using ConstWeightMap = Eigen::Map<const RowMajorMatrix>;
using BiasMap = Eigen::Map<Eigen::VectorXd>;
using ConstBiasMap = Eigen::Map<const Eigen::VectorXd>;

/// Flat gradient vector, laid out like Network::parameters().
using Gradients = std::vector<double>;

enum class OutputActivation : std::uint8_t { Sigmoid, Linear };

/// Input/target pairs, one sample per column.
struct PairedData {
  Matrix inputs;
  Matrix targets;

  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
};

/// Concatenates sample columns of two datasets with equal dimensions.
PairedData concatenate(const PairedData& a, const PairedData& b);
/// Copies the selected columns.
PairedData select(const PairedData& data, std::span<const std::size_t> rows);

/// Fully connected network: ReLU hidden layers and a sigmoid (or, for test
/// stubs, linear) output layer.
///
/// All weights and biases live in one contiguous vector so that optimizers and
/// the meta-learning code can treat the model as a flat parameter vector. Layer
/// m contributes its weight matrix (dims[m+1] x dims[m], row-major) followed by
/// its bias vector.
class Network {
 public:
  Network() = default;
  /// Zero-initialized parameters. dims needs at least two entries, all > 0.
  explicit Network(std::vector<std::size_t> dims, OutputActivation output = OutputActivation::Sigmoid);

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t layer_count() const { return dims_.empty() ? 0 : dims_.size() - 1; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::size_t parameter_count() const { return params_.size(); }
  OutputActivation output_activation() const { return output_; }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  WeightMap weight(std::size_t layer);
  ConstWeightMap weight(std::size_t layer) const;
  BiasMap bias(std::size_t layer);
  ConstBiasMap bias(std::size_t layer) const;

  /// Maps columns of `inputs` through the network.
  Matrix forward(const Matrix& inputs) const;
  std::vector<double> forward(std::span<const double> x) const;

  /// Batch loss (see mse_loss) on the selected columns.
  double loss(const PairedData& data, std::span<const std::size_t> rows) const;

  /// Loss and its exact gradient with respect to every parameter. `grad` must
  /// have parameter_count() entries and is overwritten.
  double loss_and_gradient(const Matrix& inputs, const Matrix& targets, std::span<double> grad) const;
  double loss_and_gradient(const PairedData& data, std::span<const std::size_t> rows,
                           std::span<double> grad) const;

  bool operator==(const Network&) const = default;

 private:
  struct Offsets {
    std::size_t weight = 0;
    std::size_t bias = 0;
    bool operator==(const Offsets&) const = default;
  };

  std::vector<std::size_t> dims_;
  OutputActivation output_ = OutputActivation::Sigmoid;
  std::vector<Offsets> offsets_;
  std::vector<double> params_;
};

/// He-normal weights (variance 2 / fan_in), zero biases.
Network init_network(std::vector<std::size_t> dims, std::uint64_t seed,
                     OutputActivation output = OutputActivation::Sigmoid);

/// (1/B) sum_i ||outputs_i - targets_i||^2 over columns. Not divided by the dimension.
double mse_loss(const Matrix& outputs, const Matrix& targets);

/// Loss and gradients for one batch.
std::pair<double, Gradients> backward(const Network& net, const Matrix& inputs, const Matrix& targets);

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step_count = 0;
  double rho1 = 0.9;
  double rho2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n_params) : first_moment(n_params, 0.0), second_moment(n_params, 0.0) {}
};

/// Bias-corrected ADAM update, in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr);

/// params -= lr * grads, in place.
void sgd_step(std::span<double> params, std::span<const double> grads, double lr);

}  // namespace fdkg::nn
