#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gestura/error.hpp"

namespace gestura {

/// Dense row-major matrix. Small on purpose: the projector and token blocks
/// need shape checks and row views, not a linear-algebra package.
template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::span<T> flat() noexcept { return data_; }
  std::span<const T> flat() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// y = A x + b
template <typename T>
std::vector<T> affine(const Matrix<T>& a, std::span<const T> x, std::span<const T> b) {
  if (a.cols() != x.size() || a.rows() != b.size()) {
    throw InvalidInput("affine: dimension mismatch");
  }
  std::vector<T> y(b.begin(), b.end());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row(r);
    T acc{};
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
  return y;
}

/// y = A^T x
template <typename T>
std::vector<T> transpose_times(const Matrix<T>& a, std::span<const T> x) {
  std::vector<T> y(a.cols(), T{});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) y[c] += row[c] * x[r];
  }
  return y;
}

/// A += alpha * u v^T
template <typename T>
void add_outer(Matrix<T>& a, T alpha, std::span<const T> u, std::span<const T> v) {
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto row = a.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += alpha * u[r] * v[c];
  }
}

}  // namespace gestura
