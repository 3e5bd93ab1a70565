#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace dengue {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix column(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void fill(double value);
  bool same_shape(const Matrix& other) const noexcept { return rows_ == other.rows_ && cols_ == other.cols_; }
  std::string shape_string() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double scalar);

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Product with a fixed summation order: each output entry accumulates
/// left-to-right over the shared dimension.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);
Matrix hadamard(const Matrix& a, const Matrix& b);

/// y (+)= A x for a row-major block of `rows` x `cols` starting at `a`.
void gemv(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x, std::span<double> y,
          bool accumulate);

/// y += A^T x.
void gemv_transposed_add(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
                         std::span<double> y);

/// A += u v^T.
void outer_add(std::span<double> a, std::span<const double> u, std::span<const double> v);

}  // namespace dengue
