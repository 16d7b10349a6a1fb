#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "scatterforge/rng.hpp"

namespace scatterforge {

// Dense row-major matrix of doubles. Batches, features, costs and transport
// plans are all carried by this one type.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

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

  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// a^T * b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double factor);

// Softmax over each row with the row maximum subtracted first.
Matrix row_softmax(const Matrix& m);
// log(softmax) per row, same shift.
Matrix row_log_softmax(const Matrix& m);

std::vector<double> row_sums(const Matrix& m);
std::vector<double> col_sums(const Matrix& m);

double frobenius_dot(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& m);
double max_abs(const Matrix& m);

// Stable log(sum(exp(values))). Returns -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> values);

// I.i.d. uniform entries in [lo, hi].
Matrix uniform(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi);

// Selects the given rows, in order.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices);
// Stacks b under a.
Matrix vstack(const Matrix& a, const Matrix& b);

}  // namespace scatterforge
