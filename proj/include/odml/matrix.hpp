#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace odml {

// Dense row-major matrix of doubles. Every numeric kernel in this project
// runs in 64-bit precision.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix row_vector(std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;
  void fill(double value);

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

// a += scale * b, elementwise; shapes must agree.
void axpy(Matrix& a, const Matrix& b, double scale = 1.0);

// Concatenate blocks left-to-right; all blocks must share a row count.
Matrix hconcat(std::span<const Matrix> blocks);

// Columns [begin, begin+width) of m as a new matrix.
Matrix slice_cols(const Matrix& m, std::size_t begin, std::size_t width);

double squared_distance(std::span<const double> a, std::span<const double> b);
double euclidean_distance(std::span<const double> a, std::span<const double> b);
double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

void require_finite(const Matrix& m, const std::string& where);
void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& where);

}  // namespace odml
