#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <string_view>

namespace cindes {

using RandomEngine = std::mt19937_64;

/// Seed for the named substream `name`/`index` of a master seed. Streams are
/// keyed by a stable string hash, so introducing a new stream name never
/// shifts the seeds of existing ones.
std::uint64_t stream_seed(std::uint64_t master, std::string_view name,
                          std::uint64_t index = 0);

inline RandomEngine make_engine(std::uint64_t master, std::string_view name,
                                std::uint64_t index = 0) {
  return RandomEngine(stream_seed(master, name, index));
}

/// rows x cols matrix of i.i.d. N(0,1) draws, filled row by row so that row i
/// is the i-th draw of a `cols`-dimensional standard normal vector.
template <typename Engine>
Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, Engine& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = normal(rng);
  return out;
}

template <typename Engine>
Eigen::VectorXd standard_normal(Eigen::Index size, Engine& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd out(size);
  for (Eigen::Index i = 0; i < size; ++i) out(i) = normal(rng);
  return out;
}

/// rows x lo.size() matrix with row i uniform on the box [lo, hi].
template <typename Engine>
Eigen::MatrixXd uniform_box(Eigen::Index rows, const Eigen::VectorXd& lo,
                            const Eigen::VectorXd& hi, Engine& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd out(rows, lo.size());
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < lo.size(); ++j)
      out(i, j) = lo(j) + (hi(j) - lo(j)) * unit(rng);
  return out;
}

}  // namespace cindes
