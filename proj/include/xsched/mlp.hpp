#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace xsched {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct DenseLayer {
  MatrixX<Scalar> weight;  // out x in
  VectorX<Scalar> bias;    // out
};

/// Fully connected network: tanh on hidden layers, identity on the output.
/// The same type holds parameters, gradients and optimizer moments.
template <typename Scalar>
struct MlpParams {
  std::vector<DenseLayer<Scalar>> layers;

  int input_size() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }
  int output_size() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows()); }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  std::vector<int> dimensions() const {
    std::vector<int> dims;
    if (layers.empty()) return dims;
    dims.push_back(input_size());
    for (const auto& l : layers) dims.push_back(static_cast<int>(l.weight.rows()));
    return dims;
  }
};

/// Zero-valued parameters with layer sizes `dims` (input first).
template <typename Scalar>
MlpParams<Scalar> mlp_zeros(const std::vector<int>& dims) {
  if (dims.size() < 2) throw std::invalid_argument("mlp needs at least an input and an output size");
  MlpParams<Scalar> p;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    if (dims[i] < 1 || dims[i + 1] < 1) throw std::invalid_argument("mlp layer sizes must be positive");
    p.layers.push_back({MatrixX<Scalar>::Zero(dims[i + 1], dims[i]), VectorX<Scalar>::Zero(dims[i + 1])});
  }
  return p;
}

template <typename Scalar>
MlpParams<Scalar> zeros_like(const MlpParams<Scalar>& p) {
  return mlp_zeros<Scalar>(p.dimensions());
}

/// Glorot-uniform weights, zero biases. The output layer is scaled by
/// `output_scale` so a fresh policy head starts close to uniform.
template <typename Scalar, typename Engine>
MlpParams<Scalar> mlp_init(const std::vector<int>& dims, Engine& rng, Scalar output_scale = Scalar(1)) {
  auto p = mlp_zeros<Scalar>(dims);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& w = p.layers[i].weight;
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    const Scalar scale = i + 1 == p.layers.size() ? output_scale : Scalar(1);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = scale * static_cast<Scalar>(dist(rng));
  }
  return p;
}

/// Activations of every layer for a batch (one sample per column), kept for
/// the backward pass. `activations[0]` is the input.
template <typename Scalar>
struct MlpTape {
  std::vector<MatrixX<Scalar>> activations;

  const MatrixX<Scalar>& output() const { return activations.back(); }
};

template <typename Scalar, typename Derived>
MlpTape<Scalar> mlp_forward_batch(const MlpParams<Scalar>& params, const Eigen::MatrixBase<Derived>& inputs) {
  if (inputs.rows() != params.input_size())
    throw std::invalid_argument("mlp input has " + std::to_string(inputs.rows()) + " rows, expected " +
                                std::to_string(params.input_size()));
  MlpTape<Scalar> tape;
  tape.activations.reserve(params.layers.size() + 1);
  tape.activations.emplace_back(inputs);
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    MatrixX<Scalar> z = l.weight * tape.activations.back();
    z.colwise() += l.bias;
    if (i + 1 < params.layers.size()) z = z.array().tanh().matrix();
    tape.activations.push_back(std::move(z));
  }
  return tape;
}

template <typename Scalar, typename Derived>
VectorX<Scalar> mlp_forward(const MlpParams<Scalar>& params, const Eigen::MatrixBase<Derived>& input) {
  if (input.cols() != 1) throw std::invalid_argument("mlp_forward expects a column vector");
  return mlp_forward_batch(params, input).output().col(0);
}

/// Gradient of sum(d_output .* output) with respect to every parameter,
/// given the tape of the forward pass that produced `output`.
template <typename Scalar, typename Derived>
MlpParams<Scalar> mlp_backward(const MlpParams<Scalar>& params, const MlpTape<Scalar>& tape,
                               const Eigen::MatrixBase<Derived>& d_output) {
  if (d_output.rows() != params.output_size() || d_output.cols() != tape.output().cols())
    throw std::invalid_argument("mlp_backward: output gradient shape mismatch");
  MlpParams<Scalar> grad;
  grad.layers.resize(params.layers.size());
  MatrixX<Scalar> delta = d_output;
  for (std::size_t i = params.layers.size(); i-- > 0;) {
    const auto& input = tape.activations[i];
    grad.layers[i].weight.noalias() = delta * input.transpose();
    grad.layers[i].bias = delta.rowwise().sum();
    if (i == 0) break;
    MatrixX<Scalar> back = params.layers[i].weight.transpose() * delta;
    // tanh'(z) = 1 - tanh(z)^2, and the tape stores tanh(z).
    delta = (back.array() * (Scalar(1) - input.array().square())).matrix();
  }
  return grad;
}

template <typename Scalar>
Scalar squared_norm(const MlpParams<Scalar>& p) {
  Scalar s(0);
  for (const auto& l : p.layers) s += l.weight.squaredNorm() + l.bias.squaredNorm();
  return s;
}

template <typename Scalar>
bool all_finite(const MlpParams<Scalar>& p) {
  for (const auto& l : p.layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

template <typename Scalar>
void scale_in_place(MlpParams<Scalar>& p, Scalar factor) {
  for (auto& l : p.layers) {
    l.weight *= factor;
    l.bias *= factor;
  }
}

/// Parameters in declared order: per layer, weight column-major then bias.
template <typename Scalar>
VectorX<Scalar> flatten(const MlpParams<Scalar>& p) {
  VectorX<Scalar> flat(p.parameter_count());
  Eigen::Index at = 0;
  for (const auto& l : p.layers) {
    flat.segment(at, l.weight.size()) = l.weight.reshaped();
    at += l.weight.size();
    flat.segment(at, l.bias.size()) = l.bias;
    at += l.bias.size();
  }
  return flat;
}

template <typename Scalar, typename Derived>
void unflatten(MlpParams<Scalar>& p, const Eigen::MatrixBase<Derived>& flat) {
  if (flat.size() != p.parameter_count()) throw std::invalid_argument("unflatten: size mismatch");
  Eigen::Index at = 0;
  for (auto& l : p.layers) {
    l.weight.reshaped() = flat.segment(at, l.weight.size());
    at += l.weight.size();
    l.bias = flat.segment(at, l.bias.size());
    at += l.bias.size();
  }
}

}  // namespace xsched
