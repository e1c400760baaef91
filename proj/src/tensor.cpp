#include "nfgnn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "nfgnn/errors.hpp"

namespace nfgnn {

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeMismatch(fmt::format("tensor data length {} does not match shape {}x{}",
                                    data_.size(), rows_, cols_));
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeMismatch("ragged rows in Tensor::from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(data));
}

Tensor Tensor::row_vector(std::span<const double> values) {
  return Tensor(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor& Tensor::operator+=(const Tensor& o) {
  if (!same_shape(o)) {
    throw ShapeMismatch(
        fmt::format("cannot add {}x{} to {}x{}", o.rows_, o.cols_, rows_, cols_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

}  // namespace nfgnn
