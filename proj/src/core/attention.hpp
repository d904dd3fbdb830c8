#pragma once

#include <vector>

#include "core/matrix.hpp"
#include "core/tape.hpp"

namespace cdt {

// Multi-head projection weights. All projections are width x width; heads
// split them column-wise, so the per-head dimension is width / heads and the
// score scaling uses that per-head dimension.
struct AttentionParams {
  Matrix w_q, w_k, w_v, w_o;
  std::size_t heads = 1;

  std::size_t width() const { return w_q.rows(); }
  std::size_t head_dim() const { return width() / heads; }
  void validate() const;
};

// Tape node handles for one attention application; the per-head weight nodes
// back the probability-vector and convex-combination checks as well as the
// heatmap export.
struct AttentionNodes {
  ValueId output;
  std::vector<ValueId> head_weights;  // each M x N
  std::vector<ValueId> head_outputs;  // each M x head_dim, before w_o
};

struct AttentionParamIds {
  ValueId w_q, w_k, w_v, w_o;
  std::size_t heads = 1;
};

// q, k, v are full-width projected sequences (q: M x width, k/v: N x width).
// Computes per head softmax(q_h k_h^T / sqrt(d_k)) v_h, concatenates heads
// and applies the output projection.
AttentionNodes attend(Tape& tape, ValueId q, ValueId k, ValueId v,
                      std::size_t heads, ValueId w_o);

// Projects x (or the pair x_s, x_t) and attends. Queries come from the first
// argument, keys and values from the second; output length equals the query
// count.
AttentionNodes cross_attention_nodes(Tape& tape, ValueId x_s, ValueId x_t,
                                     const AttentionParamIds& p);

// Value-level entry points; a scratch tape runs the same code path as
// training.
Matrix self_attention(const Matrix& x, const AttentionParams& p);
Matrix cross_attention(const Matrix& x_s, const Matrix& x_t,
                       const AttentionParams& p);

// Head-averaged softmax weight matrix (M x N) for inspection or CSV export.
Matrix attention_weights(const Matrix& x_s, const Matrix& x_t,
                         const AttentionParams& p);

// Everything at once, for tests and exports.
struct AttentionDetail {
  Matrix output;
  std::vector<Matrix> head_weights;
  std::vector<Matrix> head_outputs;
  Matrix mean_weights;
};
AttentionDetail cross_attention_detail(const Matrix& x_s, const Matrix& x_t,
                                       const AttentionParams& p);

AttentionParamIds register_attention(Tape& tape, const AttentionParams& p,
                                     bool trainable);

}  // namespace cdt
