#include "core/attention.hpp"

#include <cmath>

#include "core/error.hpp"

namespace cdt {

void AttentionParams::validate() const {
  const std::size_t w = w_q.rows();
  if (heads == 0 || w == 0 || w % heads != 0) {
    fail(ErrorCode::invalid_argument,
         "AttentionParams: width " + std::to_string(w) +
             " must be a positive multiple of heads " +
             std::to_string(heads));
  }
  auto check = [&](const Matrix& m, const char* name) {
    if (m.rows() != w || m.cols() != w) {
      fail(ErrorCode::dimension_mismatch,
           std::string("AttentionParams: ") + name + " must be " +
               std::to_string(w) + "x" + std::to_string(w) + ", got " +
               m.shape_str());
    }
  };
  check(w_k, "w_k");
  check(w_v, "w_v");
  check(w_o, "w_o");
}

AttentionNodes attend(Tape& tape, ValueId q, ValueId k, ValueId v,
                      std::size_t heads, ValueId w_o) {
  const std::size_t width = tape.value(q).cols();
  if (heads == 0 || width % heads != 0) {
    fail(ErrorCode::invalid_argument,
         "attend: width " + std::to_string(width) +
             " not divisible by heads " + std::to_string(heads));
  }
  if (tape.value(k).cols() != width || tape.value(v).cols() != width) {
    fail(ErrorCode::dimension_mismatch,
         "attend: q/k/v width mismatch: " + tape.value(q).shape_str() + ", " +
             tape.value(k).shape_str() + ", " + tape.value(v).shape_str());
  }
  const std::size_t d = width / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d));

  AttentionNodes out;
  std::vector<ValueId> pieces;
  pieces.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const ValueId qh = tape.slice_cols(q, h * d, d);
    const ValueId kh = tape.slice_cols(k, h * d, d);
    const ValueId vh = tape.slice_cols(v, h * d, d);
    const ValueId scores = tape.scale(tape.matmul_nt(qh, kh), inv_scale);
    const ValueId weights = tape.softmax_rows(scores);
    const ValueId mixed = tape.matmul(weights, vh);
    out.head_weights.push_back(weights);
    out.head_outputs.push_back(mixed);
    pieces.push_back(mixed);
  }
  out.output = tape.matmul(tape.concat_cols(pieces), w_o);
  return out;
}

AttentionParamIds register_attention(Tape& tape, const AttentionParams& p,
                                     bool trainable) {
  AttentionParamIds ids;
  ids.heads = p.heads;
  if (trainable) {
    ids.w_q = tape.param(p.w_q);
    ids.w_k = tape.param(p.w_k);
    ids.w_v = tape.param(p.w_v);
    ids.w_o = tape.param(p.w_o);
  } else {
    ids.w_q = tape.constant(p.w_q);
    ids.w_k = tape.constant(p.w_k);
    ids.w_v = tape.constant(p.w_v);
    ids.w_o = tape.constant(p.w_o);
  }
  return ids;
}

AttentionNodes cross_attention_nodes(Tape& tape, ValueId x_s, ValueId x_t,
                                     const AttentionParamIds& p) {
  const ValueId q = tape.matmul(x_s, p.w_q);
  const ValueId k = tape.matmul(x_t, p.w_k);
  const ValueId v = tape.matmul(x_t, p.w_v);
  return attend(tape, q, k, v, p.heads, p.w_o);
}

namespace {

void check_input(const Matrix& x, const AttentionParams& p, const char* op) {
  p.validate();
  if (x.rows() == 0) {
    fail(ErrorCode::invalid_argument,
         std::string(op) + ": empty token sequence");
  }
  if (x.cols() != p.width()) {
    fail(ErrorCode::dimension_mismatch,
         std::string(op) + ": token width " + std::to_string(x.cols()) +
             " does not match projection width " +
             std::to_string(p.width()));
  }
}

AttentionDetail run_detail(const Matrix& x_s, const Matrix& x_t,
                           const AttentionParams& p) {
  Tape tape;
  const ValueId s = tape.constant(x_s);
  const ValueId t = tape.constant(x_t);
  const AttentionParamIds ids = register_attention(tape, p, false);
  const AttentionNodes nodes = cross_attention_nodes(tape, s, t, ids);

  AttentionDetail detail;
  detail.output = tape.value(nodes.output);
  Matrix mean(x_s.rows(), x_t.rows());
  for (std::size_t h = 0; h < p.heads; ++h) {
    detail.head_weights.push_back(tape.value(nodes.head_weights[h]));
    detail.head_outputs.push_back(tape.value(nodes.head_outputs[h]));
    mean = add(mean, detail.head_weights.back());
  }
  detail.mean_weights = scale(mean, 1.0 / static_cast<double>(p.heads));
  return detail;
}

}  // namespace

Matrix cross_attention(const Matrix& x_s, const Matrix& x_t,
                       const AttentionParams& p) {
  check_input(x_s, p, "cross_attention");
  check_input(x_t, p, "cross_attention");
  return run_detail(x_s, x_t, p).output;
}

Matrix self_attention(const Matrix& x, const AttentionParams& p) {
  check_input(x, p, "self_attention");
  return run_detail(x, x, p).output;
}

Matrix attention_weights(const Matrix& x_s, const Matrix& x_t,
                         const AttentionParams& p) {
  check_input(x_s, p, "attention_weights");
  check_input(x_t, p, "attention_weights");
  return run_detail(x_s, x_t, p).mean_weights;
}

AttentionDetail cross_attention_detail(const Matrix& x_s, const Matrix& x_t,
                                       const AttentionParams& p) {
  check_input(x_s, p, "cross_attention_detail");
  check_input(x_t, p, "cross_attention_detail");
  return run_detail(x_s, x_t, p);
}

}  // namespace cdt
