#include "cindes/diffusion.hpp"

#include <cmath>

namespace cindes {

void DiffusionConfig::validate() const {
  if (!(T > 1.0) || !std::isfinite(T)) throw UsageError("diffusion config: T must be greater than 1");
  if (!(delta > 0.0 && delta < 1.0)) throw UsageError("diffusion config: delta must lie in (0, 1)");
  if (M < 2 || M % 2 != 0) throw UsageError("diffusion config: M must be an even integer >= 2");
  if (K < 1) throw UsageError("diffusion config: K must be >= 1");
}

DiffusionConfig DiffusionConfig::rate_defaults(const NetworkShape& shape, Eigen::Index n) {
  const double nl = static_cast<double>(shape.width) * shape.depth;
  int steps = static_cast<int>(std::ceil(nl * nl));
  if (steps % 2 != 0) ++steps;
  DiffusionConfig c;
  c.M = steps;
  c.K = steps;
  c.delta = 1.0 / steps;
  c.T = std::max(8.0, std::log(static_cast<double>(std::max<Eigen::Index>(n, 1))));
  return c;
}

ForwardMoments forward_moments(double t) {
  if (!(t >= 0.0)) throw DomainError("forward moments need t >= 0");
  return ForwardMoments{std::exp(-t), std::sqrt(-std::expm1(-2.0 * t))};
}

DiffusionSchedule build_schedule(const DiffusionConfig& config) {
  config.validate();
  const int M = config.M;
  const int half = M / 2;
  DiffusionSchedule s;
  s.t.resize(M + 1);
  for (int m = 0; m <= M; ++m) {
    if (m <= half)
      s.t(m) = (config.T - 1.0) * m / half;
    else
      s.t(m) = config.T - std::pow(config.delta, static_cast<double>(2 * m - M) / M);
  }
  s.t(half) = config.T - 1.0;
  s.t(M) = config.T - config.delta;
  s.alpha.resize(M);
  s.alphabar.resize(M + 1);
  for (int m = 0; m <= M; ++m) s.alphabar(m) = std::exp(-2.0 * (config.T - s.t(m)));
  for (int m = 0; m < M; ++m) s.alpha(m) = std::exp(-2.0 * (s.t(m + 1) - s.t(m)));
  return s;
}

Eigen::VectorXd reference_score(const ReferenceDistribution& reference, const Eigen::Ref<const Eigen::VectorXd>& y,
                                double t) {
  const auto [m, sigma] = forward_moments(t);
  const Eigen::MatrixXd cov = m * m * reference.covariance() +
                              sigma * sigma * Eigen::MatrixXd::Identity(y.size(), y.size());
  return -cov.llt().solve(y - m * reference.mean());
}

}  // namespace cindes
