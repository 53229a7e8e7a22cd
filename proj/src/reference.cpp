#include "cindes/reference.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cindes/errors.hpp"

namespace cindes {

ReferenceDistribution ReferenceDistribution::uniform_box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
  if (lo.size() != hi.size() || lo.size() == 0)
    throw ShapeError("uniform box bounds must be non-empty and of equal length");
  for (Eigen::Index j = 0; j < lo.size(); ++j) {
    if (!std::isfinite(lo(j)) || !std::isfinite(hi(j)) || !(lo(j) < hi(j)))
      throw CoverageError("degenerate uniform box on coordinate " + std::to_string(j + 1) +
                          ": need lo < hi");
  }
  return ReferenceDistribution(UniformBox{std::move(lo), std::move(hi)});
}

ReferenceDistribution ReferenceDistribution::gaussian(Eigen::VectorXd mu, Eigen::MatrixXd sigma) {
  const Eigen::Index d = mu.size();
  if (d == 0 || sigma.rows() != d || sigma.cols() != d)
    throw ShapeError("gaussian reference needs a d-vector mean and a d x d covariance");
  if (!sigma.isApprox(sigma.transpose(), 1e-12))
    throw DomainError("gaussian reference covariance is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw DomainError("gaussian reference covariance is not positive-definite");
  GaussianReference g;
  g.mu = std::move(mu);
  g.sigma = std::move(sigma);
  g.chol = llt.matrixL();
  const double log_det = 2.0 * g.chol.diagonal().array().log().sum();
  g.log_norm = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi) - 0.5 * log_det;
  return ReferenceDistribution(std::move(g));
}

int ReferenceDistribution::dim() const {
  return static_cast<int>(is_box() ? box().lo.size() : gaussian_params().mu.size());
}

double ReferenceDistribution::log_density(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  if (y.size() != dim()) throw ShapeError("reference log-density: dimension mismatch");
  if (is_box()) {
    const auto& b = box();
    return b.contains(y) ? -b.log_volume() : -std::numeric_limits<double>::infinity();
  }
  const auto& g = gaussian_params();
  const Eigen::VectorXd z = g.chol.triangularView<Eigen::Lower>().solve(y - g.mu);
  return g.log_norm - 0.5 * z.squaredNorm();
}

Eigen::VectorXd ReferenceDistribution::log_density_batch(const Eigen::Ref<const Eigen::MatrixXd>& ys) const {
  if (ys.cols() != dim()) throw ShapeError("reference log-density: dimension mismatch");
  Eigen::VectorXd out(ys.rows());
  if (is_box()) {
    const auto& b = box();
    const double inside = -b.log_volume();
    for (Eigen::Index i = 0; i < ys.rows(); ++i) {
      const bool in = (ys.row(i).transpose().array() >= b.lo.array()).all() &&
                      (ys.row(i).transpose().array() <= b.hi.array()).all();
      out(i) = in ? inside : -std::numeric_limits<double>::infinity();
    }
    return out;
  }
  const auto& g = gaussian_params();
  Eigen::MatrixXd centered = (ys.rowwise() - g.mu.transpose()).transpose();
  g.chol.triangularView<Eigen::Lower>().solveInPlace(centered);
  out = (g.log_norm - 0.5 * centered.colwise().squaredNorm().array()).transpose();
  return out;
}

Eigen::MatrixXd ReferenceDistribution::sample(Eigen::Index n, RandomEngine& rng) const {
  if (is_box()) return cindes::uniform_box(n, box().lo, box().hi, rng);
  const auto& g = gaussian_params();
  Eigen::MatrixXd z = standard_normal(n, g.mu.size(), rng);
  return (z * g.chol.transpose()).rowwise() + g.mu.transpose();
}

Eigen::VectorXd ReferenceDistribution::mean() const {
  if (is_box()) return 0.5 * (box().lo + box().hi);
  return gaussian_params().mu;
}

Eigen::MatrixXd ReferenceDistribution::covariance() const {
  if (is_box()) {
    const Eigen::VectorXd w = box().hi - box().lo;
    return (w.array().square() / 12.0).matrix().asDiagonal();
  }
  return gaussian_params().sigma;
}

}  // namespace cindes
