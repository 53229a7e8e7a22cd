#pragma once

// Implicit sampler: a discretized reverse Ornstein-Uhlenbeck diffusion whose
// score is a Monte-Carlo plug-in of an (unnormalized) conditional density.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "cindes/errors.hpp"
#include "cindes/nn.hpp"
#include "cindes/reference.hpp"
#include "cindes/rng.hpp"

namespace cindes {

struct DiffusionConfig {
  double T = 8.0;
  double delta = 0.01;
  int M = 256;
  int K = 2048;
  std::uint64_t seed = 0;
  // Mean update scaled by 1/sqrt(alpha_m) (stationary-consistent); false
  // applies 1/alpha_m instead.
  bool sqrt_alpha_update = true;
  bool clip_to_reference = false;  // clip final draws to a box reference

  /// Throws UsageError unless T > 1, 0 < delta < 1, M >= 2 even and K >= 1.
  void validate() const;

  /// K = M = ceil((width * depth)^2) rounded up to even, delta = 1 / M and
  /// T = max(8, ln n).
  static DiffusionConfig rate_defaults(const NetworkShape& shape, Eigen::Index n);
};

struct ForwardMoments {
  double m = 1.0;      // e^{-t}
  double sigma = 0.0;  // sqrt(1 - e^{-2t})
};

ForwardMoments forward_moments(double t);

struct DiffusionSchedule {
  Eigen::VectorXd t;         // t_0 .. t_M
  Eigen::VectorXd alpha;     // alpha_0 .. alpha_{M-1}
  Eigen::VectorXd alphabar;  // alphabar_0 .. alphabar_M

  int steps() const { return static_cast<int>(alpha.size()); }
};

/// Linear steps up to T - 1 over the first half, then geometric in the
/// remaining time down to delta.
DiffusionSchedule build_schedule(const DiffusionConfig& config);

/// Anything that evaluates log p(y | x) up to a constant, row-wise.
template <typename D>
concept ConditionalDensity = requires(const D& d, const Eigen::MatrixXd& ys, const Eigen::VectorXd& x) {
  { d.dy() } -> std::convertible_to<int>;
  { d.log_density_batch(ys, x) } -> std::convertible_to<Eigen::VectorXd>;
  { d.reference() } -> std::convertible_to<const ReferenceDistribution&>;
};

struct ScoreEstimate {
  Eigen::VectorXd score;
  bool degenerate = false;  // every smoothing draw hit zero density
};

/// Plug-in score of the diffused density at (y, t) for the given smoothing
/// draws U (K x d_y):
///
///   s(y, t) = -(1 / sigma_t) sum_k U_k w_k / sum_k w_k,  w_k = p((y - sigma_t U_k) / m_t | x).
///
/// Weights are formed from max-shifted log densities, so the estimate does not
/// depend on the scale of p.
template <ConditionalDensity D>
ScoreEstimate score_from_draws(const D& density, const Eigen::Ref<const Eigen::VectorXd>& y, double t,
                               const Eigen::Ref<const Eigen::VectorXd>& x,
                               const Eigen::Ref<const Eigen::MatrixXd>& U) {
  if (!(t > 0.0)) throw DomainError("score estimate needs t > 0");
  if (y.size() != density.dy() || U.cols() != density.dy())
    throw ShapeError("score estimate: y and U must have the response dimension");
  if (U.rows() < 1) throw DomainError("score estimate needs K >= 1");
  const auto [m, sigma] = forward_moments(t);
  const Eigen::MatrixXd points = ((-sigma * U).rowwise() + y.transpose()) / m;
  const Eigen::VectorXd log_p = density.log_density_batch(points, x);
  const double hi = log_p.maxCoeff();
  ScoreEstimate out{Eigen::VectorXd::Zero(density.dy()), false};
  if (!std::isfinite(hi)) {
    out.degenerate = true;
    return out;
  }
  const Eigen::VectorXd w = (log_p.array() - hi).exp().matrix();
  const double denom = std::max(w.sum(), 1e-300 * static_cast<double>(U.rows()));
  out.score = -(U.transpose() * w) / (sigma * denom);
  return out;
}

/// score_from_draws with K fresh standard normal draws from rng.
template <ConditionalDensity D>
ScoreEstimate score_estimate(const D& density, const Eigen::Ref<const Eigen::VectorXd>& y, double t,
                             const Eigen::Ref<const Eigen::VectorXd>& x, int K, RandomEngine& rng) {
  if (K < 1) throw DomainError("score estimate needs K >= 1");
  if (!(t > 0.0)) throw DomainError("score estimate needs t > 0");
  return score_from_draws(density, y, t, x, standard_normal(K, density.dy(), rng));
}

/// Exact diffused score of the Gaussian with the reference's mean and
/// covariance; stands in when the plug-in estimate is degenerate.
Eigen::VectorXd reference_score(const ReferenceDistribution& reference, const Eigen::Ref<const Eigen::VectorXd>& y,
                                double t);

struct SamplerStats {
  int degenerate_scores = 0;
};

/// One draw from the reverse diffusion. Noise and smoothing draws come from
/// independent streams of sample_seed.
template <ConditionalDensity D>
Eigen::VectorXd sample(const D& density, const Eigen::Ref<const Eigen::VectorXd>& x, const DiffusionConfig& config,
                       std::uint64_t sample_seed, SamplerStats* stats = nullptr) {
  config.validate();
  const DiffusionSchedule schedule = build_schedule(config);
  RandomEngine noise_rng = make_engine(sample_seed, "noise");
  RandomEngine score_rng = make_engine(sample_seed, "score");
  const int dy = density.dy();

  Eigen::VectorXd y = standard_normal(dy, noise_rng);
  for (int m = 0; m < schedule.steps(); ++m) {
    const double alpha = schedule.alpha(m);
    const double residual = config.T - schedule.t(m);
    ScoreEstimate s = score_estimate(density, y, residual, x, config.K, score_rng);
    if (s.degenerate) {
      s.score = reference_score(density.reference(), y, residual);
      if (stats) ++stats->degenerate_scores;
    }
    const double scale = config.sqrt_alpha_update ? 1.0 / std::sqrt(alpha) : 1.0 / alpha;
    const double noise_sd = std::sqrt((1.0 - alpha) * (1.0 - schedule.alphabar(m)) / (1.0 - schedule.alphabar(m + 1)));
    y = scale * (y + (1.0 - alpha) * s.score) + noise_sd * standard_normal(dy, noise_rng);
    if (!y.allFinite())
      throw SamplerDivergedError("sampler state became non-finite at step " + std::to_string(m + 1), m + 1);
  }
  if (config.clip_to_reference && density.reference().is_box()) {
    const auto& box = density.reference().box();
    y = y.cwiseMax(box.lo).cwiseMin(box.hi);
  }
  return y;
}

/// Seed of row `index` in a batch drawn under config.seed.
inline std::uint64_t sample_seed(const DiffusionConfig& config, std::uint64_t index) {
  return stream_seed(config.seed, "sample", index);
}

/// count x d_y matrix; row r is sample(..., sample_seed(config, first_index + r)).
/// Rows are split over up to `threads` workers without changing the result.
template <ConditionalDensity D>
Eigen::MatrixXd sample_batch(const D& density, const Eigen::Ref<const Eigen::VectorXd>& x,
                             const DiffusionConfig& config, Eigen::Index count, std::uint64_t first_index = 0,
                             int threads = 1, SamplerStats* stats = nullptr) {
  if (count < 0) throw DomainError("sample_batch needs count >= 0");
  config.validate();
  Eigen::MatrixXd out(count, density.dy());
  const int workers = static_cast<int>(std::clamp<Eigen::Index>(threads, 1, std::max<Eigen::Index>(count, 1)));
  std::vector<SamplerStats> worker_stats(static_cast<std::size_t>(workers));
  auto run = [&](int w) {
    for (Eigen::Index r = w; r < count; r += workers)
      out.row(r) = sample(density, x, config, sample_seed(config, first_index + static_cast<std::uint64_t>(r)),
                          &worker_stats[static_cast<std::size_t>(w)])
                       .transpose();
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    {
      std::vector<std::jthread> pool;
      for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
          try {
            run(w);
          } catch (...) {
            errors[static_cast<std::size_t>(w)] = std::current_exception();
          }
        });
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  if (stats)
    for (const auto& s : worker_stats) stats->degenerate_scores += s.degenerate_scores;
  return out;
}

}  // namespace cindes
