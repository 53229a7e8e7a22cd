#pragma once

// Synthetic data-generating processes with exact samplers and closed-form
// (conditional) densities, used as ground truth for benchmarking.

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cindes/dataset.hpp"
#include "cindes/rng.hpp"

namespace cindes {

enum class DgpKind {
  SphericalMixture,     // unconditional, 6 spherical Gaussians on a circle
  EllipticalMixture,    // unconditional, 8 elongated Gaussians on a circle
  Nonlinear,            // I(a)
  Additive,             // I(b)
  CondGaussianMixture,  // I(c)
  MultivariateLinear,   // II
};

/// Normal distribution N(mu, sigma^2) restricted to [-bound, bound].
struct TruncatedNormal {
  double mu = 0.0;
  double sigma = 1.0;
  double bound = 1.0;

  double pdf(double y) const;
  /// Inverse-CDF draw for a uniform variate u in (0, 1).
  double quantile(double u) const;

  template <typename Engine>
  double sample(Engine& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    return quantile(unit(rng));
  }
};

double normal_cdf(double z);
double normal_quantile(double p);

enum class AdditiveTerm { CosPi, Sin, SquaredTent, Logistic, SqrtAbs };

double additive_term(AdditiveTerm term, double x);
std::string_view additive_term_name(AdditiveTerm term);

struct DgpSpec {
  DgpKind kind = DgpKind::Nonlinear;
  std::uint64_t structure_seed = 0;
  int dx = 0;
  int dy = 1;
  Eigen::VectorXd x_lo, x_hi;  // covariate law: uniform on this box (empty when dx = 0)
  Eigen::VectorXd y_lo, y_hi;  // response support, or evaluation box for full-support mixtures

  // Gaussian mixtures (equal weights).
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;

  std::array<AdditiveTerm, 5> additive_terms{};  // mean function of x_1..x_5
  Eigen::MatrixXd linear_weights;                // dy x dx, rows on the simplex

  std::string name() const;
  /// Table label: "I(a)", "I(b)", "I(c)", "II", or the mixture name.
  std::string label() const;
};

/// Builds a DGP; random structure (additive terms, linear weights) is drawn
/// once from structure_seed.
DgpSpec make_dgp(DgpKind kind, std::uint64_t structure_seed = 0);
/// Accepts the names from dgp_names() and the labels I(a), I(b), I(c), II.
/// Throws UsageError for unknown names.
DgpSpec make_dgp(std::string_view name, std::uint64_t structure_seed = 0);
std::vector<std::string> dgp_names();

Eigen::MatrixXd sample_covariates(const DgpSpec& spec, Eigen::Index n, RandomEngine& rng);

Dataset sample_joint(const DgpSpec& spec, Eigen::Index n, RandomEngine& rng);

/// n draws of Y from the true conditional law at covariate x.
Eigen::MatrixXd true_sampler_reference(const DgpSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                                       Eigen::Index n, RandomEngine& rng);

/// Exact density of y given x; 0 outside the support.
double true_density(const DgpSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& y,
                    const Eigen::Ref<const Eigen::VectorXd>& x);

/// Row-wise true_density; X has one row per row of Y, or zero columns.
Eigen::VectorXd true_density_batch(const DgpSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                   const Eigen::Ref<const Eigen::MatrixXd>& X);

}  // namespace cindes
