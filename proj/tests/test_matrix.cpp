#include <doctest.h>

#include <cmath>

#include "core/error.hpp"
#include "core/matrix.hpp"
#include "core/rng.hpp"

using namespace cdt;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(-2.0, 2.0);
  return m;
}

// Scalar triple-loop reference, independent of the production kernel.
Matrix matmul_oracle(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("matrix") {

TEST_CASE("matmul identity") {
  const Matrix i2 = Matrix::identity(2);
  CHECK(matmul(i2, i2) == i2);
}

TEST_CASE("matmul hand arithmetic") {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{0}, {1}};
  const Matrix c = matmul(a, b);
  CHECK(c(0, 0) == 2.0);
  CHECK(c(1, 0) == 4.0);
}

TEST_CASE("matmul against triple-loop oracle") {
  Rng rng(11);
  const Matrix a = random_matrix(5, 7, rng);
  const Matrix b = random_matrix(7, 3, rng);
  CHECK(max_abs_diff(matmul(a, b), matmul_oracle(a, b)) < 1e-12);
}

TEST_CASE("matmul dimension mismatch names both shapes") {
  const Matrix a(2, 3), b(4, 2);
  try {
    matmul(a, b);
    FAIL("expected dimension error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::dimension_mismatch);
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("4x2") != std::string::npos);
  }
}

TEST_CASE("matmul associativity on random triples") {
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(4, 6, rng);
    const Matrix b = random_matrix(6, 5, rng);
    const Matrix c = random_matrix(5, 3, rng);
    CHECK(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) <
          1e-10);
  }
}

TEST_CASE("matmul_nt and matmul_tn agree with explicit transpose") {
  Rng rng(33);
  const Matrix a = random_matrix(4, 5, rng);
  const Matrix b = random_matrix(3, 5, rng);
  CHECK(max_abs_diff(matmul_nt(a, b), matmul(a, transpose(b))) < 1e-12);
  const Matrix c = random_matrix(4, 6, rng);
  CHECK(max_abs_diff(matmul_tn(a, c), matmul(transpose(a), c)) < 1e-12);
}

TEST_CASE("softmax uniform row") {
  const Matrix s = softmax_rows(Matrix{{0, 0, 0}});
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(s(0, c) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
}

TEST_CASE("softmax shift invariance") {
  for (const double c : {-100.0, 0.0, 3.5, 700.0}) {
    const Matrix s = softmax_rows(Matrix{{c, c + std::log(2.0)}});
    CHECK(std::fabs(s(0, 0) - 1.0 / 3.0) < 1e-12);
    CHECK(std::fabs(s(0, 1) - 2.0 / 3.0) < 1e-12);
  }
}

TEST_CASE("softmax against direct evaluation") {
  const Matrix s = softmax_rows(Matrix{{1, 2, 3}});
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  CHECK(std::fabs(s(0, 0) - std::exp(1.0) / z) < 1e-12);
  CHECK(std::fabs(s(0, 1) - std::exp(2.0) / z) < 1e-12);
  CHECK(std::fabs(s(0, 2) - std::exp(3.0) / z) < 1e-12);
}

TEST_CASE("softmax rows are probability vectors") {
  Rng rng(44);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix m = random_matrix(3, 6, rng);
    const Matrix s = softmax_rows(m);
    for (std::size_t r = 0; r < s.rows(); ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < s.cols(); ++c) {
        total += s(r, c);
        CHECK(s(r, c) >= 0.0);
        CHECK(s(r, c) <= 1.0);
      }
      CHECK(std::fabs(total - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("layernorm constant row maps to zero through the eps guard") {
  const Matrix gain = Matrix::filled(1, 4, 1.0);
  const Matrix bias(1, 4);
  const Matrix out =
      layernorm(Matrix::filled(3, 4, 5.0), gain, bias, 1e-6);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0);
}

TEST_CASE("layernorm leaves a standardized row unchanged at eps 0") {
  const Matrix gain = Matrix::filled(1, 2, 1.0);
  const Matrix bias(1, 2);
  const Matrix out = layernorm(Matrix{{-1, 1}}, gain, bias, 0.0);
  CHECK(out(0, 0) == doctest::Approx(-1).epsilon(1e-15));
  CHECK(out(0, 1) == doctest::Approx(1).epsilon(1e-15));
}

TEST_CASE("layernorm output moments") {
  Rng rng(55);
  const std::size_t cols = 64;
  Matrix m = random_matrix(1, cols, rng);
  const Matrix out =
      layernorm(m, Matrix::filled(1, cols, 1.0), Matrix(1, cols), 0.0);
  double mean = 0.0;
  for (std::size_t c = 0; c < cols; ++c) mean += out(0, c);
  mean /= static_cast<double>(cols);
  CHECK(std::fabs(mean) < 1e-10);
  double var = 0.0;
  for (std::size_t c = 0; c < cols; ++c) {
    var += (out(0, c) - mean) * (out(0, c) - mean);
  }
  var /= static_cast<double>(cols);
  CHECK(std::fabs(var - 1.0) < 1e-6);
}

TEST_CASE("argmax_row breaks ties toward the lowest index") {
  CHECK(argmax_row(Matrix{{0.1, 0.9}}) == 1);
  CHECK(argmax_row(Matrix{{0.5, 0.5, 0.2}}) == 0);
}

}  // TEST_SUITE
