#pragma once

#include <cstddef>
#include <vector>

namespace cdt {

// -log softmax(logits)[label], stabilized by max subtraction.
double cross_entropy(const std::vector<double>& logits, std::size_t label);

// Soft cross-entropy -sum_k q_k log p_k between a fixed teacher distribution
// q and student probabilities p; log arguments are clamped at 1e-12. Minimal
// over p at p == q with value H(q).
double distillation_loss(const std::vector<double>& teacher_probs,
                         const std::vector<double>& student_probs);

std::vector<double> softmax(const std::vector<double>& logits);

}  // namespace cdt
