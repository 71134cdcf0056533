#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace nai {

// Dense row-major matrix of doubles. The numeric core runs in double
// precision; single-precision feature files are widened on load.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), a_(rows * cols, 0.0) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& at(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  double at(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {a_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {a_.data() + i * cols_, cols_}; }

  std::span<double> flat() { return a_; }
  std::span<const double> flat() const { return a_; }

  void fill(double v) { a_.assign(a_.size(), v); }
  bool all_finite() const;

  bool operator==(const Matrix&) const = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> a_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

/// New matrix whose row i is m.row(rows[i]).
Matrix gather_rows(const Matrix& m, std::span<const int> rows);

/// Column-wise concatenation [a | b]; row counts must match.
Matrix hstack(const Matrix& a, const Matrix& b);

double l2_distance(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

} // namespace nai
