#include <doctest.h>

#include <cmath>

#include "core/error.hpp"
#include "core/gradcheck.hpp"
#include "core/losses.hpp"
#include "core/matrix.hpp"
#include "core/rng.hpp"
#include "core/tape.hpp"

using namespace cdt;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(-1.5, 1.5);
  return m;
}

}  // namespace

TEST_SUITE("tape") {

TEST_CASE("linear map gradient is exact") {
  // loss = ones * (W x); dW must equal ones^T x^T, i.e. x broadcast.
  const Matrix x{{2}, {3}, {5}};
  Tape tape;
  const ValueId w = tape.param(Matrix{{1, 1, 1}, {1, 1, 1}});
  const ValueId xv = tape.constant(x);
  const ValueId prod = tape.matmul(w, xv);          // 2x1
  const ValueId ones = tape.constant(Matrix{{1, 1}});
  const ValueId loss = tape.matmul(ones, prod);     // 1x1
  tape.backward(loss);
  const Matrix& g = tape.grad(w);
  for (std::size_t r = 0; r < 2; ++r) {
    CHECK(g(r, 0) == 2.0);
    CHECK(g(r, 1) == 3.0);
    CHECK(g(r, 2) == 5.0);
  }
}

TEST_CASE("cross-entropy gradient matches probs minus onehot") {
  Rng rng(3);
  const Matrix logits = random_matrix(1, 5, rng);
  Tape tape;
  const ValueId l = tape.param(logits);
  tape.backward(tape.cross_entropy_logits(l, 2));
  const Matrix probs = softmax_rows(logits);
  const Matrix& g = tape.grad(l);
  for (std::size_t c = 0; c < 5; ++c) {
    const double expect = probs(0, c) - (c == 2 ? 1.0 : 0.0);
    CHECK(std::fabs(g(0, c) - expect) < 1e-12);
  }
}

TEST_CASE("soft cross-entropy gradient is student probs minus teacher") {
  Rng rng(4);
  const Matrix logits = random_matrix(1, 4, rng);
  Matrix teacher{{0.4, 0.3, 0.2, 0.1}};
  Tape tape;
  const ValueId l = tape.param(logits);
  tape.backward(tape.soft_cross_entropy_logits(teacher, l));
  const Matrix probs = softmax_rows(logits);
  const Matrix& g = tape.grad(l);
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(std::fabs(g(0, c) - (probs(0, c) - teacher(0, c))) < 1e-12);
  }

  // Spec invariant: the same equality holds against finite differences.
  const double fd_err = finite_diff_check(
      [&](Tape& t, const std::vector<ValueId>& p) {
        return t.soft_cross_entropy_logits(teacher, p[0]);
      },
      {logits}, 1e-5);
  CHECK(fd_err < 1e-6);
}

TEST_CASE("backward requires a scalar loss") {
  Tape tape;
  const ValueId w = tape.param(Matrix{{1, 2}});
  CHECK_THROWS_AS(tape.backward(w), Error);
}

TEST_CASE("untouched parameters still get a defined zero adjoint") {
  Tape tape;
  const ValueId used = tape.param(Matrix{{1.0}});
  const ValueId unused = tape.param(Matrix{{2.0, 3.0}});
  tape.backward(tape.scale(used, 2.0));
  const Matrix& g = tape.grad(unused);
  CHECK(g.rows() == 1);
  CHECK(g.cols() == 2);
  CHECK(g(0, 0) == 0.0);
  CHECK(g(0, 1) == 0.0);
}

TEST_CASE("finite differences: quadratic is exact to roundoff") {
  Rng rng(5);
  const Matrix x0 = random_matrix(3, 2, rng);
  const double err = finite_diff_check(
      [](Tape& t, const std::vector<ValueId>& p) {
        // f(x) = sum of squares via ones^T (x .* x) ones pattern
        const ValueId ones_l = t.constant(Matrix::filled(1, 3, 1.0));
        const ValueId ones_r = t.constant(Matrix::filled(2, 1, 1.0));
        const ValueId sq = t.matmul_nt(p[0], p[0]);  // 3x3 gram
        const ValueId diag_sum =
            t.matmul(t.matmul(ones_l, sq), t.constant(Matrix::filled(3, 1, 1.0)));
        (void)ones_r;
        return diag_sum;
      },
      {x0}, 1e-5);
  CHECK(err < 1e-8);
}

TEST_CASE("finite differences: constant function has zero error") {
  const double err = finite_diff_check(
      [](Tape& t, const std::vector<ValueId>&) {
        return t.constant(Matrix{{3.25}});
      },
      {Matrix{{1, 2, 3}}}, 1e-5);
  CHECK(err == 0.0);
}

TEST_CASE("elementwise and structural ops pass finite differences") {
  Rng rng(6);
  const Matrix x0 = random_matrix(4, 6, rng);
  const Matrix gain0 = random_matrix(1, 6, rng);
  const Matrix bias0 = random_matrix(1, 6, rng);

  const double err = finite_diff_check(
      [](Tape& t, const std::vector<ValueId>& p) {
        ValueId h = t.layernorm(p[0], p[1], p[2], 1e-6);
        h = t.gelu(h);
        h = t.softmax_rows(h);
        const ValueId left = t.slice_cols(h, 0, 3);
        const ValueId right = t.slice_cols(h, 3, 3);
        h = t.concat_cols({t.sub(left, right), right});
        h = t.concat_rows(t.mean_rows(h), h);
        h = t.add_row_broadcast(h, t.take_row(h, 2));
        const ValueId ones_l = t.constant(Matrix::filled(1, 5, 1.0));
        const ValueId ones_r = t.constant(Matrix::filled(6, 1, 1.0));
        return t.matmul(t.matmul(ones_l, h), ones_r);
      },
      {x0, gain0, bias0}, 1e-5);
  CHECK(err < 1e-7);
}

TEST_CASE("value retrieval and finiteness") {
  Tape tape;
  const ValueId a = tape.constant(Matrix{{1, 2}});
  CHECK(tape.value(a)(0, 1) == 2.0);
  CHECK_THROWS_AS(tape.grad(a), Error);  // no backward ran
}

}  // TEST_SUITE
