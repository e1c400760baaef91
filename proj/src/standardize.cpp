#include "nfgnn/standardize.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "nfgnn/errors.hpp"

namespace nfgnn {

std::vector<std::size_t> non_constant_columns(const Tensor& rows) {
  std::vector<std::size_t> kept;
  if (rows.rows() == 0) return kept;
  for (std::size_t c = 0; c < rows.cols(); ++c) {
    double lo = rows(0, c), hi = rows(0, c);
    for (std::size_t r = 1; r < rows.rows(); ++r) {
      lo = std::min(lo, rows(r, c));
      hi = std::max(hi, rows(r, c));
    }
    if (hi - lo > kConstantColumnTolerance) kept.push_back(c);
  }
  return kept;
}

Tensor select_columns(const Tensor& matrix, std::span<const std::size_t> columns) {
  Tensor out(matrix.rows(), columns.size());
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    for (std::size_t k = 0; k < columns.size(); ++k) out(r, k) = matrix(r, columns[k]);
  }
  return out;
}

ColumnSelection remove_constant_columns(const Tensor& matrix, const Tensor& fit_rows) {
  if (matrix.cols() != fit_rows.cols()) throw ShapeMismatch("fit rows and matrix differ in width");
  auto kept = non_constant_columns(fit_rows);
  Tensor m = select_columns(matrix, kept);
  return {std::move(m), std::move(kept)};
}

Standardizer standardize_fit(const Tensor& train_rows) {
  if (train_rows.rows() == 0) throw EmptyInput("cannot fit a standardizer on zero rows");
  Standardizer s;
  s.kept_columns = non_constant_columns(train_rows);
  const double n = static_cast<double>(train_rows.rows());
  for (std::size_t c : s.kept_columns) {
    double m = 0.0;
    for (std::size_t r = 0; r < train_rows.rows(); ++r) m += train_rows(r, c);
    m /= n;
    double v = 0.0;
    for (std::size_t r = 0; r < train_rows.rows(); ++r) v += (train_rows(r, c) - m) * (train_rows(r, c) - m);
    double sd = std::sqrt(v / n);
    // A column can pass the range test yet have a variance that underflows.
    if (!(sd > 0.0)) sd = 1.0;
    s.mean.push_back(m);
    s.std.push_back(sd);
  }
  return s;
}

Tensor standardize_apply(const Standardizer& s, const Tensor& rows) {
  if (!s.kept_columns.empty() && s.kept_columns.back() >= rows.cols()) {
    throw ShapeMismatch(fmt::format("standardizer expects at least {} columns, got {}", s.kept_columns.back() + 1,
                                    rows.cols()));
  }
  Tensor out(rows.rows(), s.kept_columns.size());
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    for (std::size_t k = 0; k < s.kept_columns.size(); ++k) {
      out(r, k) = (rows(r, s.kept_columns[k]) - s.mean[k]) / s.std[k];
    }
  }
  return out;
}

}  // namespace nfgnn
