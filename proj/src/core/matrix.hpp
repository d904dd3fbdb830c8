#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace cdt {

// Dense row-major matrix of doubles. The single array type shared by the
// model, the labeling pipeline and the simulators. Shapes are checked on
// every operation; outputs are verified finite.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);  // zero-filled
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> init);

  static Matrix identity(std::size_t n);
  static Matrix row_vector(std::vector<double> v);
  static Matrix filled(std::size_t rows, std::size_t cols, double value);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }
  std::string shape_str() const;

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  Matrix row(std::size_t r) const;
  void set_row(std::size_t r, const Matrix& v);
  std::vector<double> row_vec(std::size_t r) const;

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Throws Error(dimension_mismatch) naming both shapes when incompatible.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b^T
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T * b
Matrix transpose(const Matrix& a);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
Matrix hadamard(const Matrix& a, const Matrix& b);
// Adds a 1 x cols row vector to every row of a.
Matrix add_row_broadcast(const Matrix& a, const Matrix& row);

// Row-stabilized softmax: subtracts each row's max before exponentiation.
// Every output row is a probability vector.
Matrix softmax_rows(const Matrix& m);

// Per-row standardization followed by gain/bias; gain and bias are 1 x cols.
// Variance is the population variance (divide by cols), eps sits inside the
// square root denominator.
Matrix layernorm(const Matrix& m, const Matrix& gain, const Matrix& bias,
                 double eps);

Matrix gelu(const Matrix& m);

Matrix mean_rows(const Matrix& m);  // 1 x cols
Matrix col_sums(const Matrix& m);  // 1 x cols
double sum(const Matrix& m);
double dot(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& m);

// L2-normalizes each row; rows with near-zero norm are left unchanged.
Matrix normalize_rows(const Matrix& m, double min_norm = 1e-12);

bool all_finite(const Matrix& m);
void require_finite(const Matrix& m, const char* op);

// Index of the largest entry of a 1 x n row; ties resolve to the lowest index.
std::size_t argmax_row(const Matrix& logits);

}  // namespace cdt
