#include "cindes/explicit.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cindes/errors.hpp"
#include "cindes/eval.hpp"

namespace cindes {
namespace {

// log(1 + e^z) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<std::uint64_t> covariate_key(const Eigen::Ref<const Eigen::VectorXd>& x) {
  std::vector<std::uint64_t> key(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) key[static_cast<std::size_t>(i)] = std::bit_cast<std::uint64_t>(x(i));
  return key;
}

Eigen::MatrixXd stack_pairs(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                            const Eigen::MatrixXd& Y_fake) {
  const Eigen::Index n = Y.rows();
  if (X.rows() != n || Y_fake.rows() != n)
    throw ShapeError("classification loss: X, Y and fake responses need equal row counts");
  if (Y_fake.cols() != Y.cols())
    throw ShapeError("classification loss: fake responses have the wrong dimension");
  const Eigen::Index dy = Y.cols();
  Eigen::MatrixXd Z(2 * n, dy + X.cols());
  Z.topLeftCorner(n, dy) = Y;
  Z.bottomLeftCorner(n, dy) = Y_fake;
  Z.topRightCorner(n, X.cols()) = X;
  Z.bottomRightCorner(n, X.cols()) = X;
  return Z;
}

void check_box_coverage(const ReferenceDistribution& reference, const Eigen::MatrixXd& Y) {
  if (!reference.is_box() || Y.rows() == 0) return;
  const auto& box = reference.box();
  const Eigen::VectorXd col_min = Y.colwise().minCoeff().transpose();
  const Eigen::VectorXd col_max = Y.colwise().maxCoeff().transpose();
  for (Eigen::Index j = 0; j < Y.cols(); ++j) {
    if (box.lo(j) > col_min(j) || box.hi(j) < col_max(j))
      throw CoverageError("reference box does not cover the observed responses on coordinate " +
                          std::to_string(j + 1));
  }
}

}  // namespace

void TrainConfig::validate() const {
  NetworkShape probe = shape;
  probe.input_dim = 1;
  probe.validate();
  if (max_epochs < 1) throw UsageError("train config: max_epochs must be >= 1");
  if (batch_size < 1) throw UsageError("train config: batch_size must be >= 1");
  if (!(lr > 0.0)) throw UsageError("train config: lr must be positive");
  if (l2_grid.empty()) throw UsageError("train config: l2_grid must not be empty");
  for (double l2 : l2_grid)
    if (!(l2 >= 0.0) || !std::isfinite(l2)) throw UsageError("train config: l2 penalties must be >= 0");
  if (!(valid_fraction > 0.0 && valid_fraction < 1.0))
    throw UsageError("train config: valid_fraction must lie in (0, 1)");
  if (patience < 1) throw UsageError("train config: patience must be >= 1");
  if (valid_ref_draws < 1 || valid_ref_draws_per_x < 1 || norm_samples < 1)
    throw UsageError("train config: reference draw counts must be >= 1");
}

DensityModel::DensityModel(NetworkParamsd params, ReferenceDistribution reference, int dx, int dy,
                           int norm_samples)
    : params_(std::move(params)),
      reference_(std::move(reference)),
      dx_(dx),
      dy_(dy),
      norm_samples_(norm_samples) {
  params_.check_layout();
  if (dx_ < 0 || dy_ < 1) throw ShapeError("density model needs dx >= 0 and dy >= 1");
  if (params_.shape.input_dim != dx_ + dy_)
    throw ShapeError("density model network input dimension must equal dx + dy");
  if (reference_.dim() != dy_) throw ShapeError("density model reference dimension must equal dy");
  if (norm_samples_ < 1) throw DomainError("density model norm_samples must be >= 1");
}

void DensityModel::check_dims(Eigen::Index y_cols, Eigen::Index x_size) const {
  if (y_cols != dy_ || x_size != dx_)
    throw ShapeError("density model expects y of length " + std::to_string(dy_) + " and x of length " +
                     std::to_string(dx_));
}

Eigen::MatrixXd DensityModel::network_inputs(const Eigen::Ref<const Eigen::MatrixXd>& ys,
                                             const Eigen::Ref<const Eigen::VectorXd>& x) const {
  check_dims(ys.cols(), x.size());
  Eigen::MatrixXd z(ys.rows(), dy_ + dx_);
  z.leftCols(dy_) = ys;
  if (dx_ > 0) z.rightCols(dx_) = x.transpose().replicate(ys.rows(), 1);
  return z;
}

Eigen::VectorXd DensityModel::logit_batch(const Eigen::Ref<const Eigen::MatrixXd>& ys,
                                          const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return forward_batch(params_, network_inputs(ys, x));
}

Eigen::VectorXd DensityModel::log_density_batch(const Eigen::Ref<const Eigen::MatrixXd>& ys,
                                                const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return logit_batch(ys, x) + reference_.log_density_batch(ys);
}

std::optional<double> DensityModel::cached_normalizer(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const auto it = norm_cache_.find(covariate_key(x));
  if (it == norm_cache_.end()) return std::nullopt;
  return it->second;
}

void DensityModel::store_normalizer(const Eigen::Ref<const Eigen::VectorXd>& x, double z) {
  if (!(z > 0.0) || !std::isfinite(z)) throw NumericError("normalizing constant must be positive and finite");
  check_dims(dy_, x.size());
  norm_cache_[covariate_key(x)] = z;
}

Eigen::MatrixXd draw_fake_responses(const Dataset& data, const ReferenceDistribution& reference,
                                    RandomEngine& rng) {
  if (reference.dim() != data.dy()) throw ShapeError("reference dimension does not match the responses");
  check_box_coverage(reference, data.Y);
  return reference.sample(data.size(), rng);
}

ReferenceDistribution default_box(const Dataset& data) {
  if (data.size() < 2) throw CoverageError("default box needs at least two observations");
  constexpr double pad = 1e-9;
  Eigen::VectorXd lo = data.Y.colwise().minCoeff().transpose();
  Eigen::VectorXd hi = data.Y.colwise().maxCoeff().transpose();
  for (Eigen::Index j = 0; j < lo.size(); ++j)
    if (!(lo(j) < hi(j)))
      throw CoverageError("response column " + std::to_string(j + 1) + " is constant; the box is degenerate");
  lo.array() -= pad;
  hi.array() += pad;
  return ReferenceDistribution::uniform_box(std::move(lo), std::move(hi));
}

double classification_loss(const NetworkParamsd& params, const Eigen::MatrixXd& X,
                           const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Y_fake) {
  const Eigen::Index n = Y.rows();
  const Eigen::VectorXd f = forward_batch(params, stack_pairs(X, Y, Y_fake));
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) total += softplus(-f(i)) + softplus(f(n + i));
  return total / static_cast<double>(n);
}

LossAndGradient loss_and_gradient(const NetworkParamsd& params, const Eigen::MatrixXd& X,
                                  const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Y_fake) {
  const Eigen::Index n = Y.rows();
  const auto tape = forward_tape(params, stack_pairs(X, Y, Y_fake));
  const Eigen::VectorXd& f = tape.outputs;
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::VectorXd output_grads(2 * n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    total += softplus(-f(i)) + softplus(f(n + i));
    output_grads(i) = -sigmoid(-f(i)) * inv_n;
    output_grads(n + i) = sigmoid(f(n + i)) * inv_n;
  }
  return {total * inv_n, backward(params, tape, output_grads)};
}

NetworkGradientd loss_gradient(const NetworkParamsd& params, const Eigen::MatrixXd& X,
                               const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Y_fake) {
  return loss_and_gradient(params, X, Y, Y_fake).gradient;
}

namespace {

struct TrainingData {
  const Dataset& train;
  const Eigen::MatrixXd& fake;
  const Dataset& valid;
  const Eigen::MatrixXd& ref_draws;
};

struct TrainedNet {
  L2Trace trace;
  NetworkParamsd params;
};

TrainedNet train_one(const TrainingData& td, const ReferenceDistribution& reference,
                     const NetworkShape& shape, const TrainConfig& config, std::size_t index) {
  const double l2 = config.l2_grid[index];
  const int dx = td.train.dx();
  const int dy = td.train.dy();
  auto validation_nll = [&](const NetworkParamsd& p) {
    return normalized_nll(DensityModel(p, reference, dx, dy), td.valid, td.ref_draws).nll;
  };

  RandomEngine init_rng = make_engine(config.seed, "init", index);
  RandomEngine batch_rng = make_engine(config.seed, "batch", index);
  NetworkParamsd params = init_params<double>(shape, init_rng);
  AdamState<double> adam(shape, config.lr);

  TrainedNet out{L2Trace{}, NetworkParamsd::Zero(shape)};
  out.trace.l2 = l2;
  out.trace.baseline_valid_nll = validation_nll(out.params);
  out.trace.best_valid_nll = out.trace.baseline_valid_nll;

  const Eigen::Index n = td.train.size();
  const Eigen::Index batch = std::min<Eigen::Index>(config.batch_size, n);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::MatrixXd xb, yb, fb;
  int since_best = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), batch_rng);
    double loss_sum = 0.0;
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index len = std::min(batch, n - start);
      xb.resize(len, dx);
      yb.resize(len, dy);
      fb.resize(len, dy);
      for (Eigen::Index r = 0; r < len; ++r) {
        const Eigen::Index i = order[static_cast<std::size_t>(start + r)];
        if (dx > 0) xb.row(r) = td.train.X.row(i);
        yb.row(r) = td.train.Y.row(i);
        fb.row(r) = td.fake.row(i);
      }
      auto lg = loss_and_gradient(params, xb, yb, fb);
      loss_sum += lg.loss * static_cast<double>(len);
      try {
        adam_step(params, lg.gradient, adam, l2);
      } catch (const NumericError& e) {
        throw TrainingDivergedError("training diverged at epoch " + std::to_string(epoch) + " (l2 = " +
                                    std::to_string(l2) + "): " + e.what());
      }
    }
    const double train_loss = loss_sum / static_cast<double>(n);
    const double valid = validation_nll(params);
    if (!std::isfinite(train_loss) || !std::isfinite(valid))
      throw TrainingDivergedError("training diverged at epoch " + std::to_string(epoch) +
                                  ": non-finite loss");
    out.trace.epochs.push_back({epoch, train_loss, valid});
    if (valid < out.trace.best_valid_nll) {
      out.trace.best_valid_nll = valid;
      out.trace.best_epoch = epoch;
      out.params = params;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return out;
}

}  // namespace

FitResult fit(const Dataset& data, const TrainConfig& config, std::optional<ReferenceDistribution> reference) {
  data.validate();
  config.validate();
  const Eigen::Index n = data.size();
  if (n < 8) throw DataError("fit needs at least 8 observations, got " + std::to_string(n));

  ReferenceDistribution ref = reference ? std::move(*reference) : default_box(data);
  if (ref.dim() != data.dy()) throw ShapeError("reference dimension does not match the responses");
  check_box_coverage(ref, data.Y);

  NetworkShape shape = config.shape;
  shape.input_dim = data.dx() + data.dy();
  shape.validate();

  RandomEngine split_rng = make_engine(config.seed, "split");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto n_valid =
      std::clamp<Eigen::Index>(std::llround(config.valid_fraction * static_cast<double>(n)), 1, n - 1);
  const std::vector<Eigen::Index> valid_idx(order.begin(), order.begin() + n_valid);
  const std::vector<Eigen::Index> train_idx(order.begin() + n_valid, order.end());
  const Dataset train = data.rows(train_idx);
  const Dataset valid = data.rows(valid_idx);

  RandomEngine fake_rng = make_engine(config.seed, "fake");
  const Eigen::MatrixXd fake = draw_fake_responses(train, ref, fake_rng);
  RandomEngine ref_rng = make_engine(config.seed, "valid-ref");
  const int draws =
      data.dx() == 0 ? config.valid_ref_draws : std::min(config.valid_ref_draws, config.valid_ref_draws_per_x);
  const Eigen::MatrixXd ref_draws = ref.sample(draws, ref_rng);

  const TrainingData td{train, fake, valid, ref_draws};
  std::vector<L2Trace> traces;
  std::optional<NetworkParamsd> best_params;
  std::size_t best_index = 0;
  for (std::size_t g = 0; g < config.l2_grid.size(); ++g) {
    TrainedNet trained = train_one(td, ref, shape, config, g);
    if (!best_params || trained.trace.best_valid_nll < traces[best_index].best_valid_nll) {
      best_index = g;
      best_params = std::move(trained.params);
    }
    traces.push_back(std::move(trained.trace));
  }
  DensityModel model(std::move(*best_params), std::move(ref), data.dx(), data.dy(), config.norm_samples);
  return FitResult{std::move(model), config.l2_grid[best_index], best_index, std::move(traces)};
}

double log_density(const DensityModel& model, const Eigen::Ref<const Eigen::VectorXd>& y,
                   const Eigen::Ref<const Eigen::VectorXd>& x) {
  return model.log_density_batch(y.transpose(), x)(0);
}

double normalizing_constant(const DensityModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, int k,
                            RandomEngine& rng) {
  if (k < 1) throw DomainError("normalization needs k >= 1 reference draws");
  const Eigen::MatrixXd draws = model.reference().sample(k, rng);
  return model.logit_batch(draws, x).array().exp().mean();
}

double normalize(DensityModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, int k, RandomEngine& rng) {
  const double z = normalizing_constant(model, x, k, rng);
  model.store_normalizer(x, z);
  return z;
}

Eigen::VectorXd normalized_log_density_batch(const DensityModel& model,
                                             const Eigen::Ref<const Eigen::MatrixXd>& ys,
                                             const Eigen::Ref<const Eigen::VectorXd>& x) {
  const auto z = model.cached_normalizer(x);
  if (!z) throw DomainError("no cached normalizing constant for this covariate; call normalize first");
  return model.log_density_batch(ys, x).array() - std::log(*z);
}

}  // namespace cindes
