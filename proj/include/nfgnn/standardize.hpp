#pragma once

#include <span>
#include <vector>

#include "nfgnn/tensor.hpp"

namespace nfgnn {

inline constexpr double kConstantColumnTolerance = 1e-12;

/// Indices of columns whose max - min over the given rows exceeds the tolerance.
std::vector<std::size_t> non_constant_columns(const Tensor& rows);

/// Drops constant columns (as judged on fit_rows) from matrix.
struct ColumnSelection {
  Tensor matrix;
  std::vector<std::size_t> kept_columns;
};
ColumnSelection remove_constant_columns(const Tensor& matrix, const Tensor& fit_rows);

Tensor select_columns(const Tensor& matrix, std::span<const std::size_t> columns);

/// Per-column z-scoring fit on training rows only, restricted to the
/// non-constant columns of those rows.
struct Standardizer {
  std::vector<std::size_t> kept_columns;
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t output_width() const noexcept { return kept_columns.size(); }
  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

Standardizer standardize_fit(const Tensor& train_rows);
Tensor standardize_apply(const Standardizer& s, const Tensor& rows);

}  // namespace nfgnn
