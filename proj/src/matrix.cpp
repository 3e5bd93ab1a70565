#include "dengue/matrix.hpp"

#include <algorithm>

#include "dengue/error.hpp"

namespace dengue {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw Error(ErrorKind::Shape, std::string(op) + ": " + a.shape_string() + " vs " + b.shape_string());
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorKind::Shape, "buffer of " + std::to_string(data_.size()) + " values cannot form " + shape_string());
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw Error(ErrorKind::Shape, "ragged initializer list");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

std::string Matrix::shape_string() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double scalar) {
  for (double& v : data_) v *= scalar;
  return *this;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorKind::Shape, "matmul: " + a.shape_string() + " * " + b.shape_string());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) sum += a(i, k) * b(k, j);
      out(i, j) = sum;
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
  return out;
}

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x, std::span<double> y,
          bool accumulate) {
  const double* row = a.data();
  for (std::size_t i = 0; i < rows; ++i, row += cols) {
    double sum = accumulate ? y[i] : 0.0;
    for (std::size_t j = 0; j < cols; ++j) sum += row[j] * x[j];
    y[i] = sum;
  }
}

void gemv_transposed_add(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
                         std::span<double> y) {
  const double* row = a.data();
  for (std::size_t i = 0; i < rows; ++i, row += cols) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    for (std::size_t j = 0; j < cols; ++j) y[j] += row[j] * xi;
  }
}

void outer_add(std::span<double> a, std::span<const double> u, std::span<const double> v) {
  double* row = a.data();
  const std::size_t cols = v.size();
  for (std::size_t i = 0; i < u.size(); ++i, row += cols) {
    const double ui = u[i];
    if (ui == 0.0) continue;
    for (std::size_t j = 0; j < cols; ++j) row[j] += ui * v[j];
  }
}

}  // namespace dengue
