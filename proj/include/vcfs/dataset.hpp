#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vcfs/error.hpp"

namespace vcfs {

/// Affine map from the raw index variable to [0,1]: t = (raw - shift) / width.
struct RescaleMap {
  double shift = 0.0;
  double width = 1.0;
  bool identity() const noexcept { return shift == 0.0 && width == 1.0; }
  double apply(double raw) const { return std::clamp((raw - shift) / width, 0.0, 1.0); }
};

/// Response, index variable and covariates. Column 0 of `x` is the intercept.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::VectorXd t;      // in [0,1]
  Eigen::VectorXd t_raw;  // as ingested
  Eigen::MatrixXd x;      // n x (p+1)
  std::vector<std::string> column_names;  // p+1 names, "intercept" first
  RescaleMap rescale;
  std::vector<int> excluded;  // constant covariates kept out of candidate pools
  std::string y_name = "y";
  std::string t_name = "t";

  Eigen::Index n() const noexcept { return y.size(); }
  int p() const noexcept { return static_cast<int>(x.cols()) - 1; }
  bool is_excluded(int j) const {
    return std::find(excluded.begin(), excluded.end(), j) != excluded.end();
  }
};

/// Min-max map onto [0,1]; identity if the values already lie in [0,1].
inline RescaleMap fit_rescale(const Eigen::VectorXd& raw) {
  const double lo = raw.minCoeff();
  const double hi = raw.maxCoeff();
  if (lo >= 0.0 && hi <= 1.0) return {};
  if (!(hi > lo)) throw DataError("index variable is constant; cannot rescale to [0,1]");
  return {lo, hi - lo};
}

/// Assembles a Dataset from raw columns: prepends the intercept, rescales T,
/// validates finiteness and flags constant covariates.
inline Dataset make_dataset(Eigen::VectorXd y, Eigen::VectorXd t_raw, const Eigen::MatrixXd& covariates,
                            std::vector<std::string> covariate_names = {}) {
  const Eigen::Index n = y.size();
  if (n < 1) throw DataError("dataset has no rows");
  if (t_raw.size() != n || covariates.rows() != n) throw ShapeError("dataset columns differ in length");
  if (covariates.cols() < 1) throw DataError("dataset needs at least one covariate");
  if (!y.allFinite() || !t_raw.allFinite() || !covariates.allFinite()) {
    throw DataError("dataset contains NaN or Inf");
  }
  Dataset d;
  d.y = std::move(y);
  d.t_raw = std::move(t_raw);
  d.rescale = fit_rescale(d.t_raw);
  d.t = d.t_raw;
  if (!d.rescale.identity()) {
    for (Eigen::Index i = 0; i < n; ++i) d.t(i) = d.rescale.apply(d.t_raw(i));
  }
  d.x.resize(n, covariates.cols() + 1);
  d.x.col(0).setOnes();
  d.x.rightCols(covariates.cols()) = covariates;
  d.column_names.push_back("intercept");
  for (Eigen::Index j = 0; j < covariates.cols(); ++j) {
    d.column_names.push_back(static_cast<std::size_t>(j) < covariate_names.size()
                                 ? covariate_names[static_cast<std::size_t>(j)]
                                 : "x" + std::to_string(j + 1));
  }
  for (Eigen::Index j = 1; j < d.x.cols(); ++j) {
    const auto col = d.x.col(j);
    if (col.maxCoeff() == col.minCoeff()) d.excluded.push_back(static_cast<int>(j));
  }
  return d;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    while (!field.empty() && field.front() == ' ') field.erase(field.begin());
    if (field.size() >= 2 && field.front() == '"' && field.back() == '"') {
      field = field.substr(1, field.size() - 2);
    }
    out.push_back(field);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || cell.empty()) {
    throw DataError("parse error at row " + std::to_string(row) + ", column '" + column +
                    "': '" + cell + "' is not a number");
  }
  return value;
}

/// Shortest text that reads back to the same double (at most 17 significant digits).
inline std::string format_double(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace detail

/// Reads a headed CSV. `y_column` and `t_column` are picked by name; every
/// other column becomes a covariate in file order.
inline Dataset load_csv(const std::string& path, const std::string& y_column,
                        const std::string& t_column, Eigen::Index min_rows = 1) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "' is empty; a header row is required");
  const auto header = detail::split_csv_line(line);
  auto find_col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("column '" + name + "' not found in '" + path + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t yi = find_col(y_column);
  const std::size_t ti = find_col(t_column);
  if (yi == ti) throw DataError("response and index variable must be different columns");

  std::vector<std::size_t> cov_idx;
  std::vector<std::string> cov_names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != yi && c != ti) {
      cov_idx.push_back(c);
      cov_names.push_back(header[c]);
    }
  }
  if (cov_idx.empty()) throw DataError("'" + path + "' has no covariate columns");

  std::vector<std::vector<double>> rows;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError("row " + std::to_string(row_no) + " has " + std::to_string(cells.size()) +
                      " fields, header has " + std::to_string(header.size()));
    }
    std::vector<double> values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      values[c] = detail::parse_number(cells[c], row_no, header[c]);
      if (!std::isfinite(values[c])) {
        throw DataError("non-finite value at row " + std::to_string(row_no) + ", column '" + header[c] + "'");
      }
    }
    rows.push_back(std::move(values));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n < min_rows) {
    throw DataError("'" + path + "' has " + std::to_string(n) + " rows; at least " +
                    std::to_string(min_rows) + " are required");
  }
  Eigen::VectorXd y(n), t(n);
  Eigen::MatrixXd cov(n, static_cast<Eigen::Index>(cov_idx.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    y(i) = r[yi];
    t(i) = r[ti];
    for (std::size_t k = 0; k < cov_idx.size(); ++k) cov(i, static_cast<Eigen::Index>(k)) = r[cov_idx[k]];
  }
  Dataset d = make_dataset(std::move(y), std::move(t), cov, std::move(cov_names));
  d.y_name = y_column;
  d.t_name = t_column;
  return d;
}

/// Writes y, raw t and the covariates (intercept omitted) with round-trip precision.
inline void write_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << d.y_name << ',' << d.t_name;
  for (int j = 1; j <= d.p(); ++j) out << ',' << d.column_names[static_cast<std::size_t>(j)];
  out << '\n';
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    out << detail::format_double(d.y(i)) << ',' << detail::format_double(d.t_raw(i));
    for (int j = 1; j <= d.p(); ++j) out << ',' << detail::format_double(d.x(i, j));
    out << '\n';
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace vcfs
