#pragma once

// Fully connected ReLU network with a truncated scalar output:
//
//   f(x) = T_R( L_{depth+1} o relu o L_depth o ... o relu o L_1 (x) ),
//   L_i(x) = W_i x + b_i,   T_R(u) = sgn(u) * min(|u|, R),
//
// together with reverse-mode gradients and an Adam optimizer. Types are
// templated on the scalar in the Eigen style; the rest of the library uses
// the double instantiation (NetworkParamsd).

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "cindes/errors.hpp"

namespace cindes {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct NetworkShape {
  int input_dim = 1;
  int depth = 3;  // hidden layers
  int width = 64;
  double truncation = 10.0;

  void validate() const {
    if (input_dim < 1 || depth < 1 || width < 1)
      throw ShapeError("network shape needs input_dim, depth and width >= 1");
    if (!(truncation > 0.0) || !std::isfinite(truncation))
      throw ShapeError("network truncation level must be a positive finite number");
  }

  int num_layers() const { return depth + 1; }
  int layer_inputs(int layer) const { return layer == 0 ? input_dim : width; }
  int layer_outputs(int layer) const { return layer == depth ? 1 : width; }

  std::size_t num_parameters() const {
    std::size_t total = 0;
    for (int i = 0; i < num_layers(); ++i)
      total += static_cast<std::size_t>(layer_outputs(i)) * (layer_inputs(i) + 1);
    return total;
  }

  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

/// Weights and biases of one network; also used as the gradient container.
template <typename Scalar>
struct NetworkParams {
  NetworkShape shape;
  std::vector<MatrixX<Scalar>> weights;  // weights[i] is d_{i+1} x d_i
  std::vector<VectorX<Scalar>> biases;

  static NetworkParams Zero(const NetworkShape& shape) {
    shape.validate();
    NetworkParams p;
    p.shape = shape;
    for (int i = 0; i < shape.num_layers(); ++i) {
      p.weights.push_back(MatrixX<Scalar>::Zero(shape.layer_outputs(i), shape.layer_inputs(i)));
      p.biases.push_back(VectorX<Scalar>::Zero(shape.layer_outputs(i)));
    }
    return p;
  }

  void setZero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
  }

  bool allFinite() const {
    for (const auto& w : weights)
      if (!w.allFinite()) return false;
    for (const auto& b : biases)
      if (!b.allFinite()) return false;
    return true;
  }

  /// Throws ShapeError unless layer count and dimensions follow `shape`.
  void check_layout() const {
    shape.validate();
    if (static_cast<int>(weights.size()) != shape.num_layers() ||
        static_cast<int>(biases.size()) != shape.num_layers())
      throw ShapeError("network parameter layer count does not match its shape");
    for (int i = 0; i < shape.num_layers(); ++i) {
      if (weights[i].rows() != shape.layer_outputs(i) || weights[i].cols() != shape.layer_inputs(i) ||
          biases[i].size() != shape.layer_outputs(i))
        throw ShapeError("network layer " + std::to_string(i) + " has inconsistent dimensions");
    }
  }

  template <typename NewScalar>
  NetworkParams<NewScalar> cast() const {
    NetworkParams<NewScalar> out;
    out.shape = shape;
    for (const auto& w : weights) out.weights.push_back(w.template cast<NewScalar>());
    for (const auto& b : biases) out.biases.push_back(b.template cast<NewScalar>());
    return out;
  }

  friend bool operator==(const NetworkParams& a, const NetworkParams& b) {
    if (!(a.shape == b.shape) || a.weights.size() != b.weights.size()) return false;
    for (std::size_t i = 0; i < a.weights.size(); ++i)
      if (a.weights[i] != b.weights[i] || a.biases[i] != b.biases[i]) return false;
    return true;
  }
};

template <typename Scalar>
using NetworkGradient = NetworkParams<Scalar>;

using NetworkParamsd = NetworkParams<double>;
using NetworkGradientd = NetworkGradient<double>;

/// He initialization: W ~ N(0, 2 / fan_in), b = 0.
template <typename Scalar, typename Engine>
NetworkParams<Scalar> init_params(const NetworkShape& shape, Engine& rng) {
  auto p = NetworkParams<Scalar>::Zero(shape);
  for (auto& w : p.weights) {
    std::normal_distribution<Scalar> normal(Scalar(0), std::sqrt(Scalar(2) / Scalar(w.cols())));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = normal(rng);
  }
  return p;
}

template <typename Scalar>
inline Scalar truncate(Scalar u, Scalar level) {
  return std::clamp(u, -level, level);
}

namespace detail {

// Column count of every product evaluated by forward_batch. Inputs are padded
// to a multiple of this so each point goes through an identically sized
// matrix product, making batch results independent of batch size.
inline constexpr Eigen::Index kForwardChunk = 64;

template <typename Scalar, typename Derived>
void check_inputs(const NetworkParams<Scalar>& params, const Eigen::MatrixBase<Derived>& inputs) {
  if (inputs.cols() != params.shape.input_dim)
    throw ShapeError("network expects " + std::to_string(params.shape.input_dim) +
                     " input columns, got " + std::to_string(inputs.cols()));
}

}  // namespace detail

/// Network output for each row of `inputs` (n x input_dim).
template <typename Scalar, typename Derived>
VectorX<Scalar> forward_batch(const NetworkParams<Scalar>& params,
                              const Eigen::MatrixBase<Derived>& inputs) {
  detail::check_inputs(params, inputs);
  constexpr Eigen::Index chunk = detail::kForwardChunk;
  const Eigen::Index n = inputs.rows();
  const Scalar level = static_cast<Scalar>(params.shape.truncation);
  const int last = params.shape.depth;

  VectorX<Scalar> out(n);
  MatrixX<Scalar> block(params.shape.input_dim, chunk);
  MatrixX<Scalar> ping(params.shape.width, chunk), pong(params.shape.width, chunk);
  MatrixX<Scalar> head(1, chunk);
  for (Eigen::Index start = 0; start < n; start += chunk) {
    const Eigen::Index len = std::min(chunk, n - start);
    block.setZero();
    block.leftCols(len) = inputs.middleRows(start, len).transpose().template cast<Scalar>();
    const MatrixX<Scalar>* current = &block;
    for (int i = 0; i < last; ++i) {
      MatrixX<Scalar>& next = (i % 2 == 0) ? ping : pong;
      next.noalias() = params.weights[i] * (*current);
      next.colwise() += params.biases[i];
      next = next.cwiseMax(Scalar(0));
      current = &next;
    }
    head.noalias() = params.weights[last] * (*current);
    head.array() += params.biases[last](0);
    for (Eigen::Index j = 0; j < len; ++j) out(start + j) = truncate(head(0, j), level);
  }
  return out;
}

/// Network output at a single point; bit-identical to the matching entry of
/// forward_batch.
template <typename Scalar, typename Derived>
Scalar forward(const NetworkParams<Scalar>& params, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != params.shape.input_dim)
    throw ShapeError("network expects an input of length " + std::to_string(params.shape.input_dim) +
                     ", got " + std::to_string(x.size()));
  MatrixX<Scalar> row = x.template cast<Scalar>().reshaped(1, x.size());
  return forward_batch(params, row)(0);
}

/// Intermediate values of one forward pass, kept for the backward pass.
/// Column j of every matrix belongs to input row j.
template <typename Scalar>
struct ForwardTape {
  std::vector<MatrixX<Scalar>> activations;     // [0] = inputs^T, [i] = relu(preactivations[i-1])
  std::vector<MatrixX<Scalar>> preactivations;  // per layer; the last one is the raw 1 x n output
  VectorX<Scalar> outputs;                      // truncated outputs
};

template <typename Scalar, typename Derived>
ForwardTape<Scalar> forward_tape(const NetworkParams<Scalar>& params,
                                 const Eigen::MatrixBase<Derived>& inputs) {
  detail::check_inputs(params, inputs);
  const int layers = params.shape.num_layers();
  ForwardTape<Scalar> tape;
  tape.activations.reserve(layers);
  tape.preactivations.reserve(layers);
  tape.activations.push_back(inputs.transpose().template cast<Scalar>());
  for (int i = 0; i < layers; ++i) {
    MatrixX<Scalar> z = params.weights[i] * tape.activations.back();
    z.colwise() += params.biases[i];
    if (i + 1 < layers) tape.activations.push_back(z.cwiseMax(Scalar(0)));
    tape.preactivations.push_back(std::move(z));
  }
  const Scalar level = static_cast<Scalar>(params.shape.truncation);
  tape.outputs = tape.preactivations.back().row(0).transpose().unaryExpr(
      [level](Scalar u) { return truncate(u, level); });
  return tape;
}

/// Gradient of sum_i output_grads[i] * f(row i) with respect to every weight
/// and bias. The truncation passes gradient only strictly inside (-R, R) and
/// the ReLU derivative at 0 is taken as 0.
template <typename Scalar, typename Derived>
NetworkGradient<Scalar> backward(const NetworkParams<Scalar>& params, const ForwardTape<Scalar>& tape,
                                 const Eigen::MatrixBase<Derived>& output_grads) {
  const Eigen::Index n = tape.activations.front().cols();
  if (output_grads.size() != n)
    throw ShapeError("backward: " + std::to_string(output_grads.size()) + " output gradients for " +
                     std::to_string(n) + " inputs");
  const Scalar level = static_cast<Scalar>(params.shape.truncation);
  const int layers = params.shape.num_layers();
  auto grads = NetworkGradient<Scalar>::Zero(params.shape);

  MatrixX<Scalar> delta(1, n);
  const auto& raw = tape.preactivations.back();
  for (Eigen::Index j = 0; j < n; ++j)
    delta(0, j) = std::abs(raw(0, j)) < level ? static_cast<Scalar>(output_grads(j)) : Scalar(0);

  for (int i = layers - 1; i >= 0; --i) {
    grads.weights[i].noalias() = delta * tape.activations[i].transpose();
    grads.biases[i] = delta.rowwise().sum();
    if (i == 0) break;
    MatrixX<Scalar> upstream = params.weights[i].transpose() * delta;
    delta = (tape.preactivations[i - 1].array() > Scalar(0)).select(upstream, Scalar(0));
  }
  return grads;
}

template <typename Scalar, typename DerivedIn, typename DerivedGrad>
NetworkGradient<Scalar> backward(const NetworkParams<Scalar>& params,
                                 const Eigen::MatrixBase<DerivedIn>& inputs,
                                 const Eigen::MatrixBase<DerivedGrad>& output_grads) {
  if (output_grads.size() != inputs.rows())
    throw ShapeError("backward: output gradient count does not match input rows");
  return backward(params, forward_tape(params, inputs), output_grads);
}

template <typename Scalar>
struct AdamState {
  NetworkParams<Scalar> first_moment;
  NetworkParams<Scalar> second_moment;
  long step = 0;
  Scalar lr = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);

  explicit AdamState(const NetworkShape& shape, Scalar learning_rate = Scalar(1e-3))
      : first_moment(NetworkParams<Scalar>::Zero(shape)),
        second_moment(NetworkParams<Scalar>::Zero(shape)),
        lr(learning_rate) {}
};

/// One bias-corrected Adam update. When `l2` is non-zero, l2 * param is added
/// to each gradient entry before the moment updates.
template <typename Scalar>
void adam_step(NetworkParams<Scalar>& params, const NetworkGradient<Scalar>& grads,
               AdamState<Scalar>& state, Scalar l2 = Scalar(0)) {
  if (!(grads.shape == params.shape) || !(state.first_moment.shape == params.shape))
    throw ShapeError("adam_step: gradient or optimizer state does not match the network shape");
  if (!grads.allFinite()) throw NumericError("adam_step: non-finite gradient entry");

  ++state.step;
  const Scalar t = static_cast<Scalar>(state.step);
  const Scalar c1 = Scalar(1) - std::pow(state.beta1, t);
  const Scalar c2 = Scalar(1) - std::pow(state.beta2, t);
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    auto gp = (g.array() + l2 * p.array()).eval();
    m.array() = state.beta1 * m.array() + (Scalar(1) - state.beta1) * gp;
    v.array() = state.beta2 * v.array() + (Scalar(1) - state.beta2) * gp.square();
    p.array() -= state.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
  };
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    update(params.weights[i], grads.weights[i], state.first_moment.weights[i],
           state.second_moment.weights[i]);
    update(params.biases[i], grads.biases[i], state.first_moment.biases[i],
           state.second_moment.biases[i]);
  }
}

}  // namespace cindes
