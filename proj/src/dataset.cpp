#include "cindes/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "cindes/errors.hpp"

namespace cindes {
namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Parses "x3" / "y1" style names; returns the 1-based index or 0.
int column_index(std::string_view name, char prefix) {
  if (name.size() < 2 || name.front() != prefix) return 0;
  int value = 0;
  const auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), value);
  if (ec != std::errc() || ptr != name.data() + name.size() || value < 1) return 0;
  return value;
}

}  // namespace

void Dataset::validate() const {
  if (X.rows() != Y.rows())
    throw DataError("dataset: X has " + std::to_string(X.rows()) + " rows but Y has " +
                    std::to_string(Y.rows()));
  if (Y.rows() < 1) throw DataError("dataset is empty");
  if (Y.cols() < 1) throw DataError("dataset has no response columns");
  if (!X.allFinite() || !Y.allFinite()) throw DataError("dataset contains non-finite entries");
}

Dataset Dataset::rows(const std::vector<Eigen::Index>& indices) const {
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(indices.size()), X.cols());
  out.Y.resize(static_cast<Eigen::Index>(indices.size()), Y.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.X.row(static_cast<Eigen::Index>(i)) = X.row(indices[i]);
    out.Y.row(static_cast<Eigen::Index>(i)) = Y.row(indices[i]);
  }
  return out;
}

Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("line 1: missing CSV header");
  const auto header = split_fields(line);
  int dx = 0, dy = 0;
  for (const auto raw : header) {
    const auto name = trim(raw);
    if (dy == 0 && column_index(name, 'x') == dx + 1) {
      ++dx;
    } else if (column_index(name, 'y') == dy + 1) {
      ++dy;
    } else {
      throw DataError("line 1: unexpected column '" + std::string(name) +
                      "'; expected header x1..x{dx},y1..y{dy}");
    }
  }
  if (dy == 0) throw DataError("line 1: header has no response columns y1..y{dy}");

  const int width = dx + dy;
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (static_cast<int>(fields.size()) != width)
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                      " fields, found " + std::to_string(fields.size()));
    for (const auto raw : fields) {
      const auto field = trim(raw);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v))
        throw DataError("line " + std::to_string(line_no) + ": non-numeric value '" +
                        std::string(field) + "'");
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw DataError("CSV contains a header but no data rows");

  Dataset data;
  data.X.resize(static_cast<Eigen::Index>(rows), dx);
  data.Y.resize(static_cast<Eigen::Index>(rows), dy);
  for (std::size_t i = 0; i < rows; ++i) {
    for (int j = 0; j < dx; ++j) data.X(i, j) = values[i * width + j];
    for (int j = 0; j < dy; ++j) data.Y(i, j) = values[i * width + dx + j];
  }
  return data;
}

Dataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  return read_csv(in);
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ec == std::errc() ? ptr : buf);
}

void write_csv(std::ostream& out, const Dataset& data) {
  for (int j = 0; j < data.dx(); ++j) out << 'x' << (j + 1) << ',';
  for (int j = 0; j < data.dy(); ++j) out << 'y' << (j + 1) << (j + 1 < data.dy() ? "," : "\n");
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (int j = 0; j < data.dx(); ++j) out << format_double(data.X(i, j)) << ',';
    for (int j = 0; j < data.dy(); ++j)
      out << format_double(data.Y(i, j)) << (j + 1 < data.dy() ? "," : "\n");
  }
}

void write_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_csv(out, data);
}

}  // namespace cindes
