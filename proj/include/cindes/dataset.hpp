#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace cindes {

/// n paired observations; row i of X and row i of Y belong together. X may
/// have zero columns (unconditional estimation).
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::MatrixXd Y;

  Eigen::Index size() const { return Y.rows(); }
  int dx() const { return static_cast<int>(X.cols()); }
  int dy() const { return static_cast<int>(Y.cols()); }

  /// Throws DataError on unequal row counts, an empty set, missing responses
  /// or non-finite entries.
  void validate() const;

  Dataset rows(const std::vector<Eigen::Index>& indices) const;
};

/// CSV with header x1..x{dx},y1..y{dy}. Errors carry the 1-based line number.
Dataset read_csv(std::istream& in);
Dataset read_csv(const std::filesystem::path& path);

/// Shortest round-trip decimal representation of every value.
void write_csv(std::ostream& out, const Dataset& data);
void write_csv(const std::filesystem::path& path, const Dataset& data);

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace cindes
