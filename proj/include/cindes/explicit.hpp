#pragma once

// Explicit density estimation by classification: real pairs [Y_i, X_i] are
// labelled 1, fake pairs [Ytilde_i, X_i] with Ytilde_i drawn from a reference
// distribution are labelled 0, and the logit f of a truncated ReLU network
// is fitted by logistic loss. The density estimate is
//
//   p(y | x) = exp(f(y, x)) * ref(y),
//
// with ref the reference density (1 / Vol on a uniform box).

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "cindes/dataset.hpp"
#include "cindes/nn.hpp"
#include "cindes/reference.hpp"
#include "cindes/rng.hpp"

namespace cindes {

struct TrainConfig {
  NetworkShape shape{.input_dim = 1, .depth = 3, .width = 64, .truncation = 10.0};  // input_dim is set by fit
  int max_epochs = 500;
  int batch_size = 256;
  double lr = 1e-3;
  std::vector<double> l2_grid{1e-3, 5e-4, 2e-4, 1e-4, 0.0};
  double valid_fraction = 0.25;
  int patience = 20;
  std::uint64_t seed = 0;
  // Reference draws behind the validation NLL normalizer. Unconditional data
  // share one normalizer over all draws; conditional data need one normalizer
  // per validation covariate and use the first `valid_ref_draws_per_x` draws.
  int valid_ref_draws = 4096;
  int valid_ref_draws_per_x = 64;
  int norm_samples = 4096;

  void validate() const;
};

class DensityModel {
 public:
  DensityModel(NetworkParamsd params, ReferenceDistribution reference, int dx, int dy,
               int norm_samples = 4096);

  int dx() const { return dx_; }
  int dy() const { return dy_; }
  int norm_samples() const { return norm_samples_; }
  const NetworkParamsd& params() const { return params_; }
  const ReferenceDistribution& reference() const { return reference_; }

  /// Network inputs [y, x] for every row of ys.
  Eigen::MatrixXd network_inputs(const Eigen::Ref<const Eigen::MatrixXd>& ys,
                                 const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// f(y, x) for each row of ys.
  Eigen::VectorXd logit_batch(const Eigen::Ref<const Eigen::MatrixXd>& ys,
                              const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Unnormalized log p(y | x) for each row of ys; -inf outside a box reference.
  Eigen::VectorXd log_density_batch(const Eigen::Ref<const Eigen::MatrixXd>& ys,
                                    const Eigen::Ref<const Eigen::VectorXd>& x) const;

  std::optional<double> cached_normalizer(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  void store_normalizer(const Eigen::Ref<const Eigen::VectorXd>& x, double z);

 private:
  void check_dims(Eigen::Index y_cols, Eigen::Index x_size) const;

  NetworkParamsd params_;
  ReferenceDistribution reference_;
  int dx_;
  int dy_;
  int norm_samples_;
  std::map<std::vector<std::uint64_t>, double> norm_cache_;  // keyed by covariate bit patterns
};

/// n i.i.d. draws from the reference. For a box reference the box must cover
/// every observed response (CoverageError otherwise).
Eigen::MatrixXd draw_fake_responses(const Dataset& data, const ReferenceDistribution& reference,
                                    RandomEngine& rng);

/// Per-coordinate [min, max] box of the observed responses, widened by 1e-9
/// on each side. Throws CoverageError for a constant response column.
ReferenceDistribution default_box(const Dataset& data);

/// Mean logistic loss of real pairs against fake pairs.
double classification_loss(const NetworkParamsd& params, const Eigen::MatrixXd& X,
                           const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Y_fake);

/// Loss value and its exact gradient in one forward/backward pass.
struct LossAndGradient {
  double loss = 0.0;
  NetworkGradientd gradient;
};
LossAndGradient loss_and_gradient(const NetworkParamsd& params, const Eigen::MatrixXd& X,
                                  const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Y_fake);

NetworkGradientd loss_gradient(const NetworkParamsd& params, const Eigen::MatrixXd& X,
                               const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Y_fake);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_nll = 0.0;
};

struct L2Trace {
  double l2 = 0.0;
  double baseline_valid_nll = 0.0;  // the constant-zero network
  double best_valid_nll = 0.0;
  int best_epoch = 0;  // 0 means no epoch beat the zero network
  std::vector<EpochRecord> epochs;
};

struct FitResult {
  DensityModel model;
  double selected_l2 = 0.0;
  std::size_t selected_index = 0;
  std::vector<L2Trace> traces;
};

/// Trains one network per L2 penalty with minibatch Adam and early stopping on
/// the validation NLL, and returns the penalty with the lowest validation NLL.
/// Deterministic for a fixed config.seed.
FitResult fit(const Dataset& data, const TrainConfig& config,
              std::optional<ReferenceDistribution> reference = std::nullopt);

/// Unnormalized log p(y | x).
double log_density(const DensityModel& model, const Eigen::Ref<const Eigen::VectorXd>& y,
                   const Eigen::Ref<const Eigen::VectorXd>& x);

/// Monte-Carlo normalizing constant Z(x) = mean_j exp f(Y_j, x), Y_j ~ reference.
/// For a box reference this equals (Vol / k) sum_j p(Y_j | x).
double normalizing_constant(const DensityModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                            int k, RandomEngine& rng);

/// normalizing_constant, also stored in the model's cache for x.
double normalize(DensityModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, int k,
                 RandomEngine& rng);

/// log p(y | x) - log Z(x) using the cached constant for x (DomainError if absent).
Eigen::VectorXd normalized_log_density_batch(const DensityModel& model,
                                             const Eigen::Ref<const Eigen::MatrixXd>& ys,
                                             const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace cindes
