#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cindes/diffusion.hpp"
#include "cindes/explicit.hpp"
#include "support.hpp"

using namespace cindes;

namespace {

DensityModel standard_gaussian_model(int d) {
  return DensityModel(testing::zero_net(d),
                      ReferenceDistribution::gaussian(Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d)), 0,
                      d);
}

DensityModel unit_box_model(int d, double log_scale = 0.0) {
  return DensityModel(testing::constant_net(d, log_scale),
                      ReferenceDistribution::uniform_box(Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)), 0, d);
}

DiffusionConfig config(double T, double delta, int M, int K = 16) {
  DiffusionConfig c;
  c.T = T;
  c.delta = delta;
  c.M = M;
  c.K = K;
  return c;
}

}  // namespace

TEST_CASE("schedule for T = 2, delta = 0.01, M = 4") {
  const auto s = build_schedule(config(2.0, 0.01, 4));
  const double expected[] = {0.0, 0.5, 1.0, 1.9, 1.99};
  REQUIRE(s.t.size() == 5);
  for (int m = 0; m < 5; ++m) CHECK(s.t(m) == doctest::Approx(expected[m]).epsilon(1e-14));
  CHECK(s.alpha(0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(s.alphabar(4) == doctest::Approx(std::exp(-0.02)).epsilon(1e-14));
}

TEST_CASE("schedule identities hold for random configs") {
  RandomEngine rng(1);
  std::uniform_real_distribution<double> T_dist(1.5, 20.0), d_dist(1e-4, 0.5);
  std::uniform_int_distribution<int> M_dist(1, 300);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = config(T_dist(rng), d_dist(rng), 2 * M_dist(rng));
    const auto s = build_schedule(c);
    CHECK(s.t(0) == 0.0);
    CHECK(s.t(c.M / 2) == c.T - 1.0);
    CHECK(s.t(c.M) == c.T - c.delta);
    for (int m = 0; m < c.M; ++m) {
      CHECK(s.t(m + 1) > s.t(m));
      CHECK(s.alpha(m) > 0.0);
      CHECK(s.alpha(m) < 1.0);
      CHECK(std::abs(s.alphabar(m) - s.alpha(m) * s.alphabar(m + 1)) <= 1e-12);
    }
  }
}

TEST_CASE("diffusion config validation") {
  CHECK_THROWS_AS(config(2.0, 0.01, 0).validate(), UsageError);
  CHECK_THROWS_AS(config(2.0, 0.01, 3).validate(), UsageError);
  CHECK_THROWS_AS(config(1.0, 0.01, 4).validate(), UsageError);
  CHECK_THROWS_AS(config(2.0, 1.0, 4).validate(), UsageError);
  CHECK_THROWS_AS(config(2.0, 0.01, 4, 0).validate(), UsageError);
  CHECK_NOTHROW(config(2.0, 0.01, 2, 1).validate());
}

TEST_CASE("rate defaults follow the network size") {
  const auto c = DiffusionConfig::rate_defaults(NetworkShape{2, 3, 5, 1.0}, 100000);
  CHECK(c.M == 226);  // (5 * 3)^2 = 225, rounded up to even
  CHECK(c.K == 226);
  CHECK(c.delta == doctest::Approx(1.0 / 226));
  CHECK(c.T == doctest::Approx(std::max(8.0, std::log(100000.0))));
  CHECK(DiffusionConfig::rate_defaults(NetworkShape{2, 3, 5, 1.0}, 1e6).T == doctest::Approx(std::log(1e6)));
}

TEST_CASE("forward moments satisfy m^2 + sigma^2 = 1") {
  for (double t : {1e-4, 0.01, 0.1, 1.0, 5.0}) {
    const auto [m, sigma] = forward_moments(t);
    CHECK(m == std::exp(-t));
    CHECK(std::abs(m * m + sigma * sigma - 1.0) <= 1e-14);
  }
  CHECK_THROWS_AS(forward_moments(-1.0), DomainError);
}

TEST_CASE("score of a flat density is the mean smoothing draw") {
  const auto model = unit_box_model(1);
  RandomEngine rng(2);
  const int K = 1000000;
  const double t = 1e-4;
  const Eigen::MatrixXd U = standard_normal(K, 1, rng);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 0.5);
  const auto s = score_from_draws(model, y, t, Eigen::VectorXd(0), U);
  const double sigma = forward_moments(t).sigma;
  CHECK_FALSE(s.degenerate);
  CHECK(s.score(0) == doctest::Approx(-U.col(0).mean() / sigma).epsilon(1e-9));
  CHECK(s.score.norm() <= 5.0 * std::sqrt(1.0 / K) / (sigma * sigma));
}

TEST_CASE("score of the standard gaussian is -y") {
  const auto model = standard_gaussian_model(2);
  RandomEngine rng(3);
  const auto s = score_estimate(model, Eigen::Vector2d(1, 0), 1.0, Eigen::VectorXd(0), 100000, rng);
  CHECK(std::abs(s.score(0) + 1.0) <= 0.05);
  CHECK(std::abs(s.score(1)) <= 0.05);
}

TEST_CASE("score with one smoothing draw") {
  const auto model = standard_gaussian_model(2);
  const Eigen::MatrixXd U = Eigen::RowVector2d(0.3, -1.2);
  const double t = 0.7;
  const auto s = score_from_draws(model, Eigen::Vector2d(0.1, 0.2), t, Eigen::VectorXd(0), U);
  const double sigma = forward_moments(t).sigma;
  CHECK(s.score(0) == doctest::Approx(-0.3 / sigma).epsilon(1e-14));
  CHECK(s.score(1) == doctest::Approx(1.2 / sigma).epsilon(1e-14));
}

TEST_CASE("score is unchanged by rescaling the density") {
  RandomEngine rng(4);
  const Eigen::MatrixXd U = standard_normal(500, 2, rng);
  const Eigen::Vector2d y(0.4, 0.6);
  const auto base = score_from_draws(unit_box_model(2), y, 0.05, Eigen::VectorXd(0), U);
  for (double c : {1e-3, 0.5, 7.0, 1e3}) {
    const auto scaled = score_from_draws(unit_box_model(2, std::log(c)), y, 0.05, Eigen::VectorXd(0), U);
    CHECK((scaled.score - base.score).norm() <= 1e-13 * base.score.norm());
  }
}

TEST_CASE("score is flagged degenerate when no draw has density") {
  const auto model = unit_box_model(1);
  RandomEngine rng(5);
  const auto s = score_estimate(model, Eigen::VectorXd::Constant(1, 100.0), 0.01, Eigen::VectorXd(0), 64, rng);
  CHECK(s.degenerate);
  CHECK(s.score.isZero(0.0));
  CHECK_THROWS_AS(score_estimate(model, Eigen::VectorXd::Zero(1), 0.0, Eigen::VectorXd(0), 8, rng), DomainError);
  CHECK_THROWS_AS(score_estimate(model, Eigen::VectorXd::Zero(1), 1.0, Eigen::VectorXd(0), 0, rng), DomainError);
}

TEST_CASE("reference score matches the exact gaussian score") {
  const auto ref = ReferenceDistribution::gaussian(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  const Eigen::Vector2d y(0.3, -2.0);
  CHECK((reference_score(ref, y, 0.8) + y).norm() <= 1e-14);
}

TEST_CASE("plug-in score error shrinks with K") {
  const auto model = standard_gaussian_model(2);
  const double t = 1.0;
  std::vector<double> ratios;
  for (int seed = 0; seed < 20; ++seed) {
    RandomEngine rng(static_cast<std::uint64_t>(100 + seed));
    const Eigen::MatrixXd ys = standard_normal(20, 2, rng);
    auto mse = [&](int K) {
      double total = 0.0;
      for (Eigen::Index i = 0; i < ys.rows(); ++i) {
        const Eigen::VectorXd y = ys.row(i).transpose();
        total += (score_estimate(model, y, t, Eigen::VectorXd(0), K, rng).score + y).squaredNorm();
      }
      return total / ys.rows();
    };
    const double coarse = mse(100);
    ratios.push_back(coarse / mse(10000));
  }
  std::nth_element(ratios.begin(), ratios.begin() + 10, ratios.end());
  CHECK(ratios[10] > 5.0);
}

TEST_CASE("sampling is deterministic per seed") {
  const auto model = standard_gaussian_model(2);
  const auto c = config(3.0, 0.05, 16, 64);
  const Eigen::VectorXd a = sample(model, Eigen::VectorXd(0), c, 42);
  const Eigen::VectorXd b = sample(model, Eigen::VectorXd(0), c, 42);
  const Eigen::VectorXd other = sample(model, Eigen::VectorXd(0), c, 43);
  CHECK(a == b);
  CHECK(a != other);
  CHECK_THROWS_AS(sample(model, Eigen::VectorXd(0), config(3.0, 0.05, 0, 64), 1), UsageError);
}

TEST_CASE("sample_batch rows match single draws") {
  const auto model = standard_gaussian_model(1);
  auto c = config(3.0, 0.05, 8, 32);
  c.seed = 9;
  const Eigen::MatrixXd one = sample_batch(model, Eigen::VectorXd(0), c, 1, 5);
  CHECK(one(0, 0) == sample(model, Eigen::VectorXd(0), c, sample_seed(c, 5))(0));
  CHECK(sample_batch(model, Eigen::VectorXd(0), c, 0).rows() == 0);

  const Eigen::MatrixXd first = sample_batch(model, Eigen::VectorXd(0), c, 50, 0);
  const Eigen::MatrixXd second = sample_batch(model, Eigen::VectorXd(0), c, 50, 50);
  for (Eigen::Index i = 0; i < 50; ++i)
    for (Eigen::Index j = 0; j < 50; ++j) CHECK(first(i, 0) != second(j, 0));

  const Eigen::MatrixXd threaded = sample_batch(model, Eigen::VectorXd(0), c, 50, 0, 3);
  CHECK(threaded == first);
}

TEST_CASE("sampler falls back to the reference score outside the box") {
  const auto model = unit_box_model(1);
  auto c = config(4.0, 0.01, 32, 16);
  SamplerStats stats;
  const Eigen::MatrixXd draws = sample_batch(model, Eigen::VectorXd(0), c, 40, 0, 1, &stats);
  CHECK(draws.allFinite());
  CHECK(stats.degenerate_scores > 0);
  c.clip_to_reference = true;
  const Eigen::MatrixXd clipped = sample_batch(model, Eigen::VectorXd(0), c, 40);
  CHECK(clipped.minCoeff() >= 0.0);
  CHECK(clipped.maxCoeff() <= 1.0);
}

TEST_CASE("slow: sampler reproduces the standard gaussian") {
  const auto model = standard_gaussian_model(2);
  auto c = config(8.0, 0.01, 128, 4096);
  c.seed = 21;
  const Eigen::MatrixXd draws = sample_batch(model, Eigen::VectorXd(0), c, 2000);
  const Eigen::RowVectorXd mean = draws.colwise().mean();
  const Eigen::MatrixXd centered = draws.rowwise() - mean;
  const Eigen::RowVectorXd var = centered.array().square().colwise().sum() / (draws.rows() - 1);
  for (int j = 0; j < 2; ++j) {
    CHECK(std::abs(mean(j)) <= 0.1);
    CHECK(std::abs(var(j) - 1.0) <= 0.15);
  }
}
