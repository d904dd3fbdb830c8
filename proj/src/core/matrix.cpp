#include "core/matrix.hpp"

#include <Eigen/Core>
#include <cmath>
#include <sstream>

#include "core/error.hpp"

namespace cdt {

namespace {

using EigenMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>;
using ConstEigenMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>;

ConstEigenMap map(const Matrix& m) {
  return ConstEigenMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                       static_cast<Eigen::Index>(m.cols()));
}

EigenMap map(Matrix& m) {
  return EigenMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                  static_cast<Eigen::Index>(m.cols()));
}

[[noreturn]] void shape_error(const char* op, const Matrix& a,
                              const Matrix& b) {
  std::ostringstream os;
  os << op << ": incompatible shapes " << a.shape_str() << " and "
     << b.shape_str();
  fail(ErrorCode::dimension_mismatch, os.str());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    fail(ErrorCode::dimension_mismatch,
         "Matrix: data length " + std::to_string(data_.size()) +
             " does not equal rows*cols for shape " + shape_str());
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> init) {
  rows_ = init.size();
  cols_ = rows_ ? init.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : init) {
    if (r.size() != cols_) {
      fail(ErrorCode::dimension_mismatch, "Matrix: ragged initializer list");
    }
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::row_vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Matrix(1, n, std::move(v));
}

Matrix Matrix::filled(std::size_t rows, std::size_t cols, double value) {
  Matrix m(rows, cols);
  std::fill(m.data_.begin(), m.data_.end(), value);
  return m;
}

std::string Matrix::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix Matrix::row(std::size_t r) const {
  Matrix out(1, cols_);
  for (std::size_t c = 0; c < cols_; ++c) out(0, c) = (*this)(r, c);
  return out;
}

void Matrix::set_row(std::size_t r, const Matrix& v) {
  if (v.rows() != 1 || v.cols() != cols_) shape_error("set_row", *this, v);
  for (std::size_t c = 0; c < cols_; ++c) (*this)(r, c) = v(0, c);
}

std::vector<double> Matrix::row_vec(std::size_t r) const {
  return std::vector<double>(data_.begin() + r * cols_,
                             data_.begin() + (r + 1) * cols_);
}

bool all_finite(const Matrix& m) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!std::isfinite(m[i])) return false;
  }
  return true;
}

void require_finite(const Matrix& m, const char* op) {
  if (!all_finite(m)) {
    fail(ErrorCode::internal,
         std::string(op) + ": produced a non-finite value");
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  Matrix out(a.rows(), b.cols());
  map(out).noalias() = map(a) * map(b);
  require_finite(out, "matmul");
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) shape_error("matmul_nt", a, b);
  Matrix out(a.rows(), b.rows());
  map(out).noalias() = map(a) * map(b).transpose();
  require_finite(out, "matmul_nt");
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) shape_error("matmul_tn", a, b);
  Matrix out(a.cols(), b.cols());
  map(out).noalias() = map(a).transpose() * map(b);
  require_finite(out, "matmul_tn");
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_error("add", a, b);
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_error("sub", a, b);
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Matrix scale(const Matrix& a, double s) {
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_error("hadamard", a, b);
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

Matrix add_row_broadcast(const Matrix& a, const Matrix& row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    shape_error("add_row_broadcast", a, row);
  Matrix out = a;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) += row(0, c);
  return out;
}

Matrix softmax_rows(const Matrix& m) {
  if (m.empty()) {
    fail(ErrorCode::invalid_argument, "softmax_rows: empty input");
  }
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double mx = m(r, 0);
    for (std::size_t c = 1; c < m.cols(); ++c) mx = std::max(mx, m(r, c));
    double denom = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) {
      out(r, c) = std::exp(m(r, c) - mx);
      denom += out(r, c);
    }
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) /= denom;
  }
  require_finite(out, "softmax_rows");
  return out;
}

Matrix layernorm(const Matrix& m, const Matrix& gain, const Matrix& bias,
                 double eps) {
  if (gain.rows() != 1 || gain.cols() != m.cols())
    shape_error("layernorm gain", m, gain);
  if (bias.rows() != 1 || bias.cols() != m.cols())
    shape_error("layernorm bias", m, bias);
  Matrix out(m.rows(), m.cols());
  const std::size_t n = m.cols();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += m(r, c);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double d = m(r, c) - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      out(r, c) = (m(r, c) - mu) * inv * gain(0, c) + bias(0, c);
    }
  }
  require_finite(out, "layernorm");
  return out;
}

Matrix gelu(const Matrix& m) {
  Matrix out = m;
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = out[i];
    out[i] = 0.5 * x * (1.0 + std::erf(x * inv_sqrt2));
  }
  return out;
}

Matrix mean_rows(const Matrix& m) {
  Matrix out = col_sums(m);
  const double inv = 1.0 / static_cast<double>(m.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= inv;
  return out;
}

Matrix col_sums(const Matrix& m) {
  Matrix out(1, m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(0, c) += m(r, c);
  return out;
}

double sum(const Matrix& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s += m[i];
  return s;
}

double dot(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_error("dot", a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double frobenius_norm(const Matrix& m) { return std::sqrt(dot(m, m)); }

Matrix normalize_rows(const Matrix& m, double min_norm) {
  Matrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double n2 = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) n2 += m(r, c) * m(r, c);
    const double n = std::sqrt(n2);
    if (n < min_norm) continue;
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) /= n;
  }
  return out;
}

std::size_t argmax_row(const Matrix& logits) {
  if (logits.rows() != 1 || logits.cols() == 0) {
    fail(ErrorCode::invalid_argument,
         "argmax_row: expected a nonempty 1xN row, got " + logits.shape_str());
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.cols(); ++c) {
    if (logits(0, c) > logits(0, best)) best = c;
  }
  return best;
}

}  // namespace cdt
