#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <random>

#include "cindes/nn.hpp"
#include "cindes/reference.hpp"

namespace cindes::testing {

/// Largest relative gap between the analytic gradient of
/// sum_i w_i f(x_i) and a central finite difference in every parameter.
inline double max_gradient_error(const NetworkParamsd& params, const Eigen::MatrixXd& inputs,
                                 const Eigen::VectorXd& weights, double h = 1e-5) {
  const NetworkGradientd g = backward(params, inputs, weights);
  auto objective = [&](const NetworkParamsd& p) { return weights.dot(forward_batch(p, inputs)); };
  double worst = 0.0;
  NetworkParamsd probe = params;
  auto check = [&](double& entry, double analytic) {
    const double saved = entry;
    entry = saved + h;
    const double up = objective(probe);
    entry = saved - h;
    const double down = objective(probe);
    entry = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  };
  for (std::size_t l = 0; l < probe.weights.size(); ++l) {
    for (Eigen::Index r = 0; r < probe.weights[l].rows(); ++r)
      for (Eigen::Index c = 0; c < probe.weights[l].cols(); ++c) check(probe.weights[l](r, c), g.weights[l](r, c));
    for (Eigen::Index r = 0; r < probe.biases[l].size(); ++r) check(probe.biases[l](r), g.biases[l](r));
  }
  return worst;
}

/// True when no hidden pre-activation lies within `margin` of 0 and the raw
/// output is not within `margin` of +-R for any input row.
inline bool away_from_kinks(const NetworkParamsd& params, const Eigen::MatrixXd& inputs, double margin = 1e-3) {
  const auto tape = forward_tape(params, inputs);
  for (std::size_t i = 0; i + 1 < tape.preactivations.size(); ++i)
    if ((tape.preactivations[i].array().abs() < margin).any()) return false;
  const double R = params.shape.truncation;
  return !((tape.preactivations.back().array().abs() - R).abs() < margin).any();
}

/// Zero network whose density model is exactly the reference density.
inline NetworkParamsd zero_net(int input_dim) {
  return NetworkParamsd::Zero(NetworkShape{input_dim, 1, 1, 10.0});
}

/// Network on one input computing f(y) = y for y >= 0.
inline NetworkParamsd identity_net() {
  auto p = NetworkParamsd::Zero(NetworkShape{1, 1, 1, 10.0});
  p.weights[0](0, 0) = 1.0;
  p.weights[1](0, 0) = 1.0;
  return p;
}

/// Constant network f = c.
inline NetworkParamsd constant_net(int input_dim, double c, double truncation = 10.0) {
  auto p = NetworkParamsd::Zero(NetworkShape{input_dim, 1, 1, truncation});
  p.biases[1](0) = c;
  return p;
}

}  // namespace cindes::testing
