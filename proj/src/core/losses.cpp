#include "core/losses.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace cdt {

std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) {
    fail(ErrorCode::invalid_argument, "softmax: empty logits");
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    denom += out[i];
  }
  for (double& v : out) v /= denom;
  return out;
}

double cross_entropy(const std::vector<double>& logits, std::size_t label) {
  if (label >= logits.size()) {
    fail(ErrorCode::invalid_argument,
         "cross_entropy: label " + std::to_string(label) +
             " out of range for K=" + std::to_string(logits.size()));
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (const double v : logits) denom += std::exp(v - mx);
  return mx + std::log(denom) - logits[label];
}

double distillation_loss(const std::vector<double>& teacher_probs,
                         const std::vector<double>& student_probs) {
  if (teacher_probs.size() != student_probs.size() || teacher_probs.empty()) {
    fail(ErrorCode::invalid_argument,
         "distillation_loss: probability vectors must have equal size");
  }
  constexpr double kLogEps = 1e-12;
  double loss = 0.0;
  for (std::size_t k = 0; k < teacher_probs.size(); ++k) {
    loss -= teacher_probs[k] * std::log(std::max(student_probs[k], kLogEps));
  }
  return loss;
}

}  // namespace cdt
