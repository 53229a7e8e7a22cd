#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <variant>

#include "cindes/rng.hpp"

namespace cindes {

struct UniformBox {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  double log_volume() const { return (hi - lo).array().log().sum(); }
  double volume() const { return (hi - lo).prod(); }
  bool contains(const Eigen::Ref<const Eigen::VectorXd>& y) const {
    return (y.array() >= lo.array()).all() && (y.array() <= hi.array()).all();
  }
};

struct GaussianReference {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd chol;  // lower Cholesky factor of sigma
  double log_norm = 0.0;  // -d/2 log(2 pi) - 1/2 log det sigma
};

/// Law of the fake responses: uniform on a box or a multivariate normal.
class ReferenceDistribution {
 public:
  /// Throws CoverageError unless lo[j] < hi[j] for every coordinate.
  static ReferenceDistribution uniform_box(Eigen::VectorXd lo, Eigen::VectorXd hi);
  /// Throws DomainError unless sigma is symmetric positive-definite.
  static ReferenceDistribution gaussian(Eigen::VectorXd mu, Eigen::MatrixXd sigma);

  int dim() const;
  bool is_box() const { return std::holds_alternative<UniformBox>(impl_); }
  const UniformBox& box() const { return std::get<UniformBox>(impl_); }
  const GaussianReference& gaussian_params() const { return std::get<GaussianReference>(impl_); }

  /// -inf outside the box for the uniform variant.
  double log_density(const Eigen::Ref<const Eigen::VectorXd>& y) const;
  Eigen::VectorXd log_density_batch(const Eigen::Ref<const Eigen::MatrixXd>& ys) const;

  /// n x dim matrix of i.i.d. draws.
  Eigen::MatrixXd sample(Eigen::Index n, RandomEngine& rng) const;

  Eigen::VectorXd mean() const;
  Eigen::MatrixXd covariance() const;

 private:
  explicit ReferenceDistribution(std::variant<UniformBox, GaussianReference> impl)
      : impl_(std::move(impl)) {}
  std::variant<UniformBox, GaussianReference> impl_;
};

}  // namespace cindes
