#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "core/matrix.hpp"

namespace cdt {

struct ValueId {
  std::int32_t index = -1;
  bool valid() const { return index >= 0; }
};

// Recording structure for reverse-mode differentiation. Operations evaluate
// eagerly and append a node holding the result plus a backward closure;
// backward() walks the record in reverse and accumulates adjoints. Nodes are
// appended in topological order by construction. A tape is confined to one
// thread.
class Tape {
 public:
  ValueId constant(Matrix m);
  ValueId param(Matrix m);  // leaf that receives a gradient

  ValueId add(ValueId a, ValueId b);
  ValueId sub(ValueId a, ValueId b);
  ValueId scale(ValueId a, double s);
  ValueId matmul(ValueId a, ValueId b);
  ValueId matmul_nt(ValueId a, ValueId b);  // a * b^T
  ValueId softmax_rows(ValueId a);
  ValueId layernorm(ValueId x, ValueId gain, ValueId bias, double eps);
  ValueId gelu(ValueId a);
  ValueId add_row_broadcast(ValueId x, ValueId row);
  ValueId slice_cols(ValueId a, std::size_t first, std::size_t count);
  ValueId concat_cols(const std::vector<ValueId>& parts);
  ValueId concat_rows(ValueId top, ValueId bottom);
  ValueId take_row(ValueId a, std::size_t r);
  ValueId mean_rows(ValueId a);

  // -log softmax(logits)[label]; logits must be 1 x K.
  ValueId cross_entropy_logits(ValueId logits, std::size_t label);
  // Soft cross-entropy -sum_k q_k log softmax(logits)_k with a constant
  // teacher distribution q (no gradient flows into the teacher).
  ValueId soft_cross_entropy_logits(const Matrix& teacher_probs,
                                    ValueId logits);

  // Seeds the scalar loss with adjoint 1 and propagates in reverse; every
  // param node ends with a defined (possibly zero) adjoint.
  void backward(ValueId loss);

  const Matrix& value(ValueId id) const;
  const Matrix& grad(ValueId id) const;
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix adjoint;          // allocated lazily during backward
    bool has_adjoint = false;
    bool needs_grad = false;  // any param upstream
    std::function<void(Tape&, const Node&)> back;  // empty for leaves
  };

  ValueId push(Matrix value, bool needs_grad,
               std::function<void(Tape&, const Node&)> back);
  Node& node(ValueId id);
  const Node& node(ValueId id) const;
  void accumulate(ValueId id, const Matrix& delta);
  void check(ValueId id) const;

  std::vector<Node> nodes_;
};

}  // namespace cdt
