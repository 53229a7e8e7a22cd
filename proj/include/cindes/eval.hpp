#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>

#include "cindes/dataset.hpp"
#include "cindes/dgp.hpp"
#include "cindes/explicit.hpp"
#include "cindes/rng.hpp"

namespace cindes {

/// Batched conditional density: row i of the result is the density of Y.row(i)
/// given X.row(i). X has zero columns for unconditional densities.
using DensityFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X)>;

struct TestPoints {
  Eigen::MatrixXd X;
  Eigen::MatrixXd Y;
};

struct MomentErrors {
  Eigen::VectorXd mean_error;  // mean(samples) - mean(reference)
  double cov_frobenius = 0.0;  // ||cov(samples) - cov(reference)||_F
};

struct EvalReport {
  double tv = 0.0;
  double nll = 0.0;  // lower is better
  std::optional<MomentErrors> moments;
  Eigen::Index n_test = 0;
  Eigen::Index nll_outside_support = 0;
  std::uint64_t seed = 0;
};

/// Mean |est - truth| over the test points. `est` must already be normalized.
double empirical_tv(const DensityFn& est, const DensityFn& truth, const TestPoints& points);

struct NllResult {
  double nll = 0.0;
  Eigen::Index evaluated = 0;
  Eigen::Index outside_support = 0;  // test responses where the model density is 0
};

/// -(1/n) sum [log p(y|x) - log Z(x)], with Z(x) = mean_i exp f(ytilde_i, x)
/// over the given reference draws (the box-volume form for uniform boxes).
/// Test points outside the model support are counted and skipped.
NllResult normalized_nll(const DensityModel& model, const Dataset& test,
                         const Eigen::Ref<const Eigen::MatrixXd>& ref_draws);
NllResult normalized_nll(const DensityModel& model, const Dataset& test, int n_ref,
                         RandomEngine& rng);

/// Total variation between the binned sample distribution and the truth on a
/// regular grid of `bins` cells per axis over [lo, hi] (d_y <= 2). Mass outside
/// the grid counts as one extra cell. True cell masses use 8x8 midpoint
/// quadrature per cell (8 points per cell in 1-D).
double histogram_tv(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                    const std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>& truth, int bins,
                    const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

MomentErrors moment_diagnostics(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                                const Eigen::Ref<const Eigen::MatrixXd>& reference_samples);

/// Test design for the TV against a DGP: `n_covariates` draws of x from the
/// covariate law, each paired with `n_responses` uniform draws of y over the
/// DGP's response box. The model is normalized once per covariate.
struct TvDesign {
  Eigen::Index n_covariates = 500;
  Eigen::Index n_responses = 500;
  int norm_samples = 4096;
};

/// 500 x 500 for scalar conditional responses, 1 x 1e5 unconditional, and
/// 250 x 400 for multivariate conditional responses.
TvDesign default_tv_design(const DgpSpec& spec);

TestPoints tv_test_points(const DgpSpec& spec, const TvDesign& design, RandomEngine& rng);

/// Empirical TV between the normalized model and the DGP's true density.
double model_tv(const DensityModel& model, const DgpSpec& spec, const TvDesign& design,
                RandomEngine& rng);

}  // namespace cindes
