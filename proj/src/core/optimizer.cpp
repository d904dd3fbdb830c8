#include "core/optimizer.hpp"

#include "core/error.hpp"

namespace cdt {

void SgdConfig::validate() const {
  if (learning_rate <= 0.0) {
    fail(ErrorCode::bad_config, "SgdConfig: learning_rate must be > 0");
  }
  if (momentum < 0.0 || momentum >= 1.0) {
    fail(ErrorCode::bad_config, "SgdConfig: momentum must be in [0, 1)");
  }
  if (weight_decay < 0.0) {
    fail(ErrorCode::bad_config, "SgdConfig: weight_decay must be >= 0");
  }
}

void SgdState::step(ModelParams& params, const std::vector<Matrix>& grads,
                    const SgdConfig& cfg) {
  std::vector<Matrix*> ptrs;
  params.for_each([&](Matrix& m) { ptrs.push_back(&m); });
  step(std::move(ptrs), grads, cfg);
}

void SgdState::step(std::vector<Matrix*> params,
                    const std::vector<Matrix>& grads, const SgdConfig& cfg) {
  cfg.validate();
  if (params.size() != grads.size()) {
    fail(ErrorCode::dimension_mismatch,
         "sgd_step: " + std::to_string(grads.size()) + " gradients for " +
             std::to_string(params.size()) + " parameters");
  }
  if (velocity_.empty()) {
    velocity_.reserve(params.size());
    for (const Matrix* p : params) {
      velocity_.emplace_back(p->rows(), p->cols());
    }
  }
  if (velocity_.size() != params.size()) {
    fail(ErrorCode::bad_state, "sgd_step: optimizer bound to another model");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    const Matrix& g = grads[i];
    Matrix& v = velocity_[i];
    if (!p.same_shape(g) || !p.same_shape(v)) {
      fail(ErrorCode::dimension_mismatch,
           "sgd_step: shape mismatch at tensor " + std::to_string(i) + ": " +
               p.shape_str() + " vs " + g.shape_str());
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      v[j] = cfg.momentum * v[j] + g[j] + cfg.weight_decay * p[j];
      p[j] -= cfg.learning_rate * v[j];
    }
  }
}

}  // namespace cdt
