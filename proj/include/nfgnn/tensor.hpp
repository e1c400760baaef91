#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace nfgnn {

/// Dense row-major matrix of doubles. Vectors are 1×n or n×1 tensors.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor row_vector(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  const std::vector<double>& values() const noexcept { return data_; }

  void fill(double v);
  bool all_finite() const noexcept;
  bool same_shape(const Tensor& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  Tensor& operator+=(const Tensor& o);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace nfgnn
