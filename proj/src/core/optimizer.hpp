#pragma once

#include <vector>

#include "core/matrix.hpp"
#include "core/model.hpp"

namespace cdt {

struct SgdConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  void validate() const;
};

// SGD with momentum: v <- momentum*v + grad + weight_decay*param,
// param <- param - lr*v.
class SgdState {
 public:
  void step(ModelParams& params, const std::vector<Matrix>& grads,
            const SgdConfig& cfg);
  void step(std::vector<Matrix*> params, const std::vector<Matrix>& grads,
            const SgdConfig& cfg);

 private:
  std::vector<Matrix> velocity_;
};

}  // namespace cdt
