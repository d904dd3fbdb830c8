#include "core/tape.hpp"

#include <cmath>

#include "core/error.hpp"

namespace cdt {

ValueId Tape::push(Matrix value, bool needs_grad,
                   std::function<void(Tape&, const Node&)> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return ValueId{static_cast<std::int32_t>(nodes_.size() - 1)};
}

void Tape::check(ValueId id) const {
  if (!id.valid() || static_cast<std::size_t>(id.index) >= nodes_.size()) {
    fail(ErrorCode::invalid_argument, "Tape: invalid value id");
  }
}

Tape::Node& Tape::node(ValueId id) {
  check(id);
  return nodes_[static_cast<std::size_t>(id.index)];
}

const Tape::Node& Tape::node(ValueId id) const {
  check(id);
  return nodes_[static_cast<std::size_t>(id.index)];
}

void Tape::accumulate(ValueId id, const Matrix& delta) {
  Node& n = node(id);
  if (!n.needs_grad) return;
  if (!n.has_adjoint) {
    n.adjoint = Matrix(n.value.rows(), n.value.cols());
    n.has_adjoint = true;
  }
  for (std::size_t i = 0; i < delta.size(); ++i) n.adjoint[i] += delta[i];
}

const Matrix& Tape::value(ValueId id) const { return node(id).value; }

const Matrix& Tape::grad(ValueId id) const {
  const Node& n = node(id);
  if (!n.has_adjoint) {
    fail(ErrorCode::bad_state, "Tape::grad: node has no adjoint");
  }
  return n.adjoint;
}

ValueId Tape::constant(Matrix m) { return push(std::move(m), false, {}); }

ValueId Tape::param(Matrix m) { return push(std::move(m), true, {}); }

ValueId Tape::add(ValueId a, ValueId b) {
  Matrix out = cdt::add(value(a), value(b));
  const bool ng = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(out), ng, [a, b](Tape& t, const Node& n) {
    t.accumulate(a, n.adjoint);
    t.accumulate(b, n.adjoint);
  });
}

ValueId Tape::sub(ValueId a, ValueId b) {
  Matrix out = cdt::sub(value(a), value(b));
  const bool ng = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(out), ng, [a, b](Tape& t, const Node& n) {
    t.accumulate(a, n.adjoint);
    t.accumulate(b, cdt::scale(n.adjoint, -1.0));
  });
}

ValueId Tape::scale(ValueId a, double s) {
  Matrix out = cdt::scale(value(a), s);
  return push(std::move(out), node(a).needs_grad,
              [a, s](Tape& t, const Node& n) {
                t.accumulate(a, cdt::scale(n.adjoint, s));
              });
}

ValueId Tape::matmul(ValueId a, ValueId b) {
  Matrix out = cdt::matmul(value(a), value(b));
  const bool ng = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(out), ng, [a, b](Tape& t, const Node& n) {
    t.accumulate(a, cdt::matmul_nt(n.adjoint, t.value(b)));
    t.accumulate(b, cdt::matmul_tn(t.value(a), n.adjoint));
  });
}

ValueId Tape::matmul_nt(ValueId a, ValueId b) {
  Matrix out = cdt::matmul_nt(value(a), value(b));
  const bool ng = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(out), ng, [a, b](Tape& t, const Node& n) {
    t.accumulate(a, cdt::matmul(n.adjoint, t.value(b)));
    t.accumulate(b, cdt::matmul_tn(n.adjoint, t.value(a)));
  });
}

ValueId Tape::softmax_rows(ValueId a) {
  Matrix out = cdt::softmax_rows(value(a));
  return push(std::move(out), node(a).needs_grad,
              [a](Tape& t, const Node& n) {
                const Matrix& y = n.value;
                const Matrix& dy = n.adjoint;
                Matrix dx(y.rows(), y.cols());
                for (std::size_t r = 0; r < y.rows(); ++r) {
                  double s = 0.0;
                  for (std::size_t c = 0; c < y.cols(); ++c)
                    s += dy(r, c) * y(r, c);
                  for (std::size_t c = 0; c < y.cols(); ++c)
                    dx(r, c) = (dy(r, c) - s) * y(r, c);
                }
                t.accumulate(a, dx);
              });
}

ValueId Tape::layernorm(ValueId x, ValueId gain, ValueId bias, double eps) {
  Matrix out = cdt::layernorm(value(x), value(gain), value(bias), eps);
  const bool ng = node(x).needs_grad || node(gain).needs_grad ||
                  node(bias).needs_grad;
  return push(std::move(out), ng, [x, gain, bias, eps](Tape& t,
                                                       const Node& n) {
    const Matrix& xm = t.value(x);
    const Matrix& g = t.value(gain);
    const Matrix& dy = n.adjoint;
    const std::size_t rows = xm.rows(), cols = xm.cols();
    const double nc = static_cast<double>(cols);

    Matrix dx(rows, cols), dgain(1, cols), dbias(1, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      double mu = 0.0;
      for (std::size_t c = 0; c < cols; ++c) mu += xm(r, c);
      mu /= nc;
      double var = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        const double d = xm(r, c) - mu;
        var += d * d;
      }
      var /= nc;
      const double inv = 1.0 / std::sqrt(var + eps);

      double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
      std::vector<double> xhat(cols), dxhat(cols);
      for (std::size_t c = 0; c < cols; ++c) {
        xhat[c] = (xm(r, c) - mu) * inv;
        dxhat[c] = dy(r, c) * g(0, c);
        dgain(0, c) += dy(r, c) * xhat[c];
        dbias(0, c) += dy(r, c);
        mean_dxhat += dxhat[c];
        mean_dxhat_xhat += dxhat[c] * xhat[c];
      }
      mean_dxhat /= nc;
      mean_dxhat_xhat /= nc;
      for (std::size_t c = 0; c < cols; ++c) {
        dx(r, c) = inv * (dxhat[c] - mean_dxhat - xhat[c] * mean_dxhat_xhat);
      }
    }
    t.accumulate(x, dx);
    t.accumulate(gain, dgain);
    t.accumulate(bias, dbias);
  });
}

ValueId Tape::gelu(ValueId a) {
  Matrix out = cdt::gelu(value(a));
  return push(std::move(out), node(a).needs_grad,
              [a](Tape& t, const Node& n) {
                const Matrix& x = t.value(a);
                Matrix dx = n.adjoint;
                constexpr double inv_sqrt2 = 0.7071067811865475244;
                constexpr double inv_sqrt2pi = 0.3989422804014326779;
                for (std::size_t i = 0; i < dx.size(); ++i) {
                  const double v = x[i];
                  const double phi = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
                  const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
                  dx[i] *= phi + v * pdf;
                }
                t.accumulate(a, dx);
              });
}

ValueId Tape::add_row_broadcast(ValueId x, ValueId row) {
  Matrix out = cdt::add_row_broadcast(value(x), value(row));
  const bool ng = node(x).needs_grad || node(row).needs_grad;
  return push(std::move(out), ng, [x, row](Tape& t, const Node& n) {
    t.accumulate(x, n.adjoint);
    t.accumulate(row, cdt::col_sums(n.adjoint));
  });
}

ValueId Tape::slice_cols(ValueId a, std::size_t first, std::size_t count) {
  const Matrix& src = value(a);
  if (first + count > src.cols()) {
    fail(ErrorCode::dimension_mismatch,
         "slice_cols: range exceeds " + src.shape_str());
  }
  Matrix out(src.rows(), count);
  for (std::size_t r = 0; r < src.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = src(r, first + c);
  return push(std::move(out), node(a).needs_grad,
              [a, first, count](Tape& t, const Node& n) {
                const Matrix& src = t.value(a);
                Matrix dx(src.rows(), src.cols());
                for (std::size_t r = 0; r < src.rows(); ++r)
                  for (std::size_t c = 0; c < count; ++c)
                    dx(r, first + c) = n.adjoint(r, c);
                t.accumulate(a, dx);
              });
}

ValueId Tape::concat_cols(const std::vector<ValueId>& parts) {
  if (parts.empty()) {
    fail(ErrorCode::invalid_argument, "concat_cols: no parts");
  }
  const std::size_t rows = value(parts[0]).rows();
  std::size_t cols = 0;
  bool ng = false;
  for (ValueId p : parts) {
    if (value(p).rows() != rows) {
      fail(ErrorCode::dimension_mismatch, "concat_cols: row count mismatch");
    }
    cols += value(p).cols();
    ng = ng || node(p).needs_grad;
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  for (ValueId p : parts) {
    const Matrix& m = value(p);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < m.cols(); ++c) out(r, off + c) = m(r, c);
    off += m.cols();
  }
  return push(std::move(out), ng, [parts](Tape& t, const Node& n) {
    std::size_t off = 0;
    for (ValueId p : parts) {
      const Matrix& m = t.value(p);
      Matrix d(m.rows(), m.cols());
      for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c)
          d(r, c) = n.adjoint(r, off + c);
      t.accumulate(p, d);
      off += m.cols();
    }
  });
}

ValueId Tape::concat_rows(ValueId top, ValueId bottom) {
  const Matrix& a = value(top);
  const Matrix& b = value(bottom);
  if (a.cols() != b.cols()) {
    fail(ErrorCode::dimension_mismatch,
         "concat_rows: " + a.shape_str() + " vs " + b.shape_str());
  }
  Matrix out(a.rows() + b.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c);
  for (std::size_t r = 0; r < b.rows(); ++r)
    for (std::size_t c = 0; c < b.cols(); ++c) out(a.rows() + r, c) = b(r, c);
  const bool ng = node(top).needs_grad || node(bottom).needs_grad;
  return push(std::move(out), ng, [top, bottom](Tape& t, const Node& n) {
    const Matrix& a = t.value(top);
    const Matrix& b = t.value(bottom);
    Matrix da(a.rows(), a.cols()), db(b.rows(), b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r)
      for (std::size_t c = 0; c < a.cols(); ++c) da(r, c) = n.adjoint(r, c);
    for (std::size_t r = 0; r < b.rows(); ++r)
      for (std::size_t c = 0; c < b.cols(); ++c)
        db(r, c) = n.adjoint(a.rows() + r, c);
    t.accumulate(top, da);
    t.accumulate(bottom, db);
  });
}

ValueId Tape::take_row(ValueId a, std::size_t r) {
  const Matrix& src = value(a);
  if (r >= src.rows()) {
    fail(ErrorCode::invalid_argument, "take_row: row out of range");
  }
  Matrix out = src.row(r);
  return push(std::move(out), node(a).needs_grad,
              [a, r](Tape& t, const Node& n) {
                const Matrix& src = t.value(a);
                Matrix dx(src.rows(), src.cols());
                for (std::size_t c = 0; c < src.cols(); ++c)
                  dx(r, c) = n.adjoint(0, c);
                t.accumulate(a, dx);
              });
}

ValueId Tape::mean_rows(ValueId a) {
  Matrix out = cdt::mean_rows(value(a));
  return push(std::move(out), node(a).needs_grad,
              [a](Tape& t, const Node& n) {
                const Matrix& src = t.value(a);
                const double inv = 1.0 / static_cast<double>(src.rows());
                Matrix dx(src.rows(), src.cols());
                for (std::size_t r = 0; r < src.rows(); ++r)
                  for (std::size_t c = 0; c < src.cols(); ++c)
                    dx(r, c) = n.adjoint(0, c) * inv;
                t.accumulate(a, dx);
              });
}

namespace {

double log_sum_exp_row(const Matrix& logits) {
  double mx = logits(0, 0);
  for (std::size_t c = 1; c < logits.cols(); ++c)
    mx = std::max(mx, logits(0, c));
  double s = 0.0;
  for (std::size_t c = 0; c < logits.cols(); ++c)
    s += std::exp(logits(0, c) - mx);
  return mx + std::log(s);
}

}  // namespace

ValueId Tape::cross_entropy_logits(ValueId logits, std::size_t label) {
  const Matrix& l = value(logits);
  if (l.rows() != 1 || l.cols() == 0) {
    fail(ErrorCode::invalid_argument,
         "cross_entropy_logits: logits must be 1xK, got " + l.shape_str());
  }
  if (label >= l.cols()) {
    fail(ErrorCode::invalid_argument,
         "cross_entropy_logits: label " + std::to_string(label) +
             " out of range for K=" + std::to_string(l.cols()));
  }
  const double lse = log_sum_exp_row(l);
  Matrix out(1, 1);
  out(0, 0) = lse - l(0, label);
  return push(std::move(out), node(logits).needs_grad,
              [logits, label](Tape& t, const Node& n) {
                const double up = n.adjoint(0, 0);
                Matrix d = cdt::softmax_rows(t.value(logits));
                d(0, label) -= 1.0;
                t.accumulate(logits, cdt::scale(d, up));
              });
}

ValueId Tape::soft_cross_entropy_logits(const Matrix& teacher_probs,
                                        ValueId logits) {
  const Matrix& l = value(logits);
  if (l.rows() != 1 || !teacher_probs.same_shape(l)) {
    fail(ErrorCode::dimension_mismatch,
         "soft_cross_entropy_logits: teacher " + teacher_probs.shape_str() +
             " vs logits " + l.shape_str());
  }
  const double lse = log_sum_exp_row(l);
  double qsum = 0.0, qdotl = 0.0;
  for (std::size_t c = 0; c < l.cols(); ++c) {
    qsum += teacher_probs(0, c);
    qdotl += teacher_probs(0, c) * l(0, c);
  }
  Matrix out(1, 1);
  out(0, 0) = lse * qsum - qdotl;
  Matrix q = teacher_probs;
  return push(std::move(out), node(logits).needs_grad,
              [logits, q, qsum](Tape& t, const Node& n) {
                const double up = n.adjoint(0, 0);
                Matrix p = cdt::softmax_rows(t.value(logits));
                Matrix d(1, p.cols());
                for (std::size_t c = 0; c < p.cols(); ++c)
                  d(0, c) = (p(0, c) * qsum - q(0, c)) * up;
                t.accumulate(logits, d);
              });
}

void Tape::backward(ValueId loss) {
  Node& ln = node(loss);
  if (ln.value.rows() != 1 || ln.value.cols() != 1) {
    fail(ErrorCode::invalid_argument,
         "backward: loss must be a 1x1 scalar, got " + ln.value.shape_str());
  }
  for (Node& n : nodes_) {
    n.has_adjoint = false;
  }
  ln.adjoint = Matrix(1, 1);
  ln.adjoint(0, 0) = 1.0;
  ln.has_adjoint = true;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_adjoint || !n.back) continue;
    n.back(*this, n);
  }
  // Every parameter leaf must expose a gradient, including ones the loss
  // never touched.
  for (Node& n : nodes_) {
    if (n.needs_grad && !n.back && !n.has_adjoint) {
      n.adjoint = Matrix(n.value.rows(), n.value.cols());
      n.has_adjoint = true;
    }
  }
}

}  // namespace cdt
