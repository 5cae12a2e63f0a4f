#include "fdkg/neuralnet.hpp"

#include <cmath>
#include <string>

#include "fdkg/error.hpp"
#include "fdkg/rng.hpp"

namespace fdkg::nn {

namespace {

void check_finite(double value, const char* what) {
  if (!std::isfinite(value)) throw NumericError(std::string("non-finite ") + what);
}

}  // namespace

PairedData concatenate(const PairedData& a, const PairedData& b) {
  if (a.inputs.rows() != b.inputs.rows() || a.targets.rows() != b.targets.rows()) {
    throw DimensionError("concatenate: dimension mismatch");
  }
  PairedData out;
  out.inputs.resize(a.inputs.rows(), a.inputs.cols() + b.inputs.cols());
  out.inputs << a.inputs, b.inputs;
  out.targets.resize(a.targets.rows(), a.targets.cols() + b.targets.cols());
  out.targets << a.targets, b.targets;
  return out;
}

PairedData select(const PairedData& data, std::span<const std::size_t> rows) {
  PairedData out;
  out.inputs.resize(data.inputs.rows(), static_cast<Eigen::Index>(rows.size()));
  out.targets.resize(data.targets.rows(), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    if (rows[c] >= data.size()) throw DimensionError("select: row index out of range");
    const auto src = static_cast<Eigen::Index>(rows[c]);
    out.inputs.col(static_cast<Eigen::Index>(c)) = data.inputs.col(src);
    out.targets.col(static_cast<Eigen::Index>(c)) = data.targets.col(src);
  }
  return out;
}

Network::Network(std::vector<std::size_t> dims, OutputActivation output)
    : dims_(std::move(dims)), output_(output) {
  if (dims_.size() < 2) throw ConfigError("network needs at least input and output dims");
  std::size_t offset = 0;
  for (std::size_t m = 0; m + 1 < dims_.size(); ++m) {
    if (dims_[m] == 0 || dims_[m + 1] == 0) throw ConfigError("network dims must be > 0");
    Offsets o;
    o.weight = offset;
    offset += dims_[m + 1] * dims_[m];
    o.bias = offset;
    offset += dims_[m + 1];
    offsets_.push_back(o);
  }
  params_.assign(offset, 0.0);
}

WeightMap Network::weight(std::size_t layer) {
  return WeightMap(params_.data() + offsets_.at(layer).weight, static_cast<Eigen::Index>(dims_[layer + 1]),
                   static_cast<Eigen::Index>(dims_[layer]));
}

ConstWeightMap Network::weight(std::size_t layer) const {
  return ConstWeightMap(params_.data() + offsets_.at(layer).weight,
                        static_cast<Eigen::Index>(dims_[layer + 1]), static_cast<Eigen::Index>(dims_[layer]));
}

BiasMap Network::bias(std::size_t layer) {
  return BiasMap(params_.data() + offsets_.at(layer).bias, static_cast<Eigen::Index>(dims_[layer + 1]));
}

ConstBiasMap Network::bias(std::size_t layer) const {
  return ConstBiasMap(params_.data() + offsets_.at(layer).bias, static_cast<Eigen::Index>(dims_[layer + 1]));
}

Matrix Network::forward(const Matrix& inputs) const {
  if (static_cast<std::size_t>(inputs.rows()) != input_dim()) {
    throw DimensionError("forward: expected input dim " + std::to_string(input_dim()) + ", got " +
                         std::to_string(inputs.rows()));
  }
  Matrix a = inputs;
  for (std::size_t m = 0; m < layer_count(); ++m) {
    Matrix z = weight(m) * a;
    z.colwise() += bias(m);
    if (m + 1 < layer_count()) {
      a = z.cwiseMax(0.0);
    } else if (output_ == OutputActivation::Sigmoid) {
      a = 1.0 / (1.0 + (-z.array()).exp());
    } else {
      a = std::move(z);
    }
  }
  return a;
}

std::vector<double> Network::forward(std::span<const double> x) const {
  const Matrix in = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  const Matrix out = forward(in);
  return std::vector<double>(out.data(), out.data() + out.size());
}

double Network::loss(const PairedData& data, std::span<const std::size_t> rows) const {
  const Matrix x = data.inputs(Eigen::all, rows);
  const Matrix t = data.targets(Eigen::all, rows);
  return mse_loss(forward(x), t);
}

double Network::loss_and_gradient(const Matrix& inputs, const Matrix& targets, std::span<double> grad) const {
  if (grad.size() != params_.size()) throw DimensionError("gradient buffer size mismatch");
  if (inputs.cols() == 0) throw DimensionError("empty batch");
  if (static_cast<std::size_t>(inputs.rows()) != input_dim() ||
      static_cast<std::size_t>(targets.rows()) != output_dim() || targets.cols() != inputs.cols()) {
    throw DimensionError("loss_and_gradient: batch shape mismatch");
  }
  const std::size_t M = layer_count();
  const double batch = static_cast<double>(inputs.cols());

  // activations[m] is the input of layer m; activations[M] is the output.
  std::vector<Matrix> activations(M + 1);
  activations[0] = inputs;
  for (std::size_t m = 0; m < M; ++m) {
    Matrix z = weight(m) * activations[m];
    z.colwise() += bias(m);
    if (m + 1 < M) {
      activations[m + 1] = z.cwiseMax(0.0);
    } else if (output_ == OutputActivation::Sigmoid) {
      activations[m + 1] = 1.0 / (1.0 + (-z.array()).exp());
    } else {
      activations[m + 1] = std::move(z);
    }
  }

  const Matrix error = activations[M] - targets;
  const double loss_value = error.squaredNorm() / batch;
  check_finite(loss_value, "loss");

  Matrix delta = (2.0 / batch) * error;
  if (output_ == OutputActivation::Sigmoid) {
    delta.array() *= activations[M].array() * (1.0 - activations[M].array());
  }
  for (std::size_t m = M; m-- > 0;) {
    const Offsets& o = offsets_[m];
    WeightMap gw(grad.data() + o.weight, static_cast<Eigen::Index>(dims_[m + 1]),
                 static_cast<Eigen::Index>(dims_[m]));
    BiasMap gb(grad.data() + o.bias, static_cast<Eigen::Index>(dims_[m + 1]));
    gw.noalias() = delta * activations[m].transpose();
    gb = delta.rowwise().sum();
    if (m > 0) {
      Matrix upstream = weight(m).transpose() * delta;
      // ReLU derivative: 1 where the activation is strictly positive, 0 otherwise.
      delta = (activations[m].array() > 0.0).select(upstream, 0.0);
    }
  }
  return loss_value;
}

double Network::loss_and_gradient(const PairedData& data, std::span<const std::size_t> rows,
                                  std::span<double> grad) const {
  const Matrix x = data.inputs(Eigen::all, rows);
  const Matrix t = data.targets(Eigen::all, rows);
  return loss_and_gradient(x, t, grad);
}

Network init_network(std::vector<std::size_t> dims, std::uint64_t seed, OutputActivation output) {
  Network net(std::move(dims), output);
  for (std::size_t m = 0; m < net.layer_count(); ++m) {
    CounterRng rng = CounterRng::for_stream(seed, {0x4e4e /* "NN" */, m});
    const double sd = std::sqrt(2.0 / static_cast<double>(net.dims()[m]));
    WeightMap w = net.weight(m);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = sd * rng.normal();
    }
  }
  return net;
}

double mse_loss(const Matrix& outputs, const Matrix& targets) {
  if (outputs.cols() == 0) throw DimensionError("mse_loss: empty batch");
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols()) {
    throw DimensionError("mse_loss: shape mismatch");
  }
  return (outputs - targets).squaredNorm() / static_cast<double>(outputs.cols());
}

std::pair<double, Gradients> backward(const Network& net, const Matrix& inputs, const Matrix& targets) {
  Gradients grads(net.parameter_count(), 0.0);
  const double loss = net.loss_and_gradient(inputs, targets, grads);
  return {loss, std::move(grads)};
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr) {
  if (grads.size() != params.size()) throw DimensionError("adam_step: gradient size mismatch");
  if (state.first_moment.empty() && state.step_count == 0) {
    state.first_moment.assign(params.size(), 0.0);
    state.second_moment.assign(params.size(), 0.0);
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw DimensionError("adam_step: state size mismatch");
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(state.rho1, t);
  const double correction2 = 1.0 - std::pow(state.rho2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.rho1 * m + (1.0 - state.rho1) * g;
    v = state.rho2 * v + (1.0 - state.rho2) * g * g;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

void sgd_step(std::span<double> params, std::span<const double> grads, double lr) {
  if (grads.size() != params.size()) throw DimensionError("sgd_step: gradient size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

}  // namespace fdkg::nn
