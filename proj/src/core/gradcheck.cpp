#include "core/gradcheck.hpp"

#include <cmath>

#include "core/error.hpp"

namespace cdt {

namespace {

double evaluate(const LossBuilder& build, const std::vector<Matrix>& params) {
  Tape tape;
  std::vector<ValueId> ids;
  ids.reserve(params.size());
  for (const Matrix& p : params) ids.push_back(tape.constant(p));
  const ValueId loss = build(tape, ids);
  const Matrix& v = tape.value(loss);
  if (v.rows() != 1 || v.cols() != 1) {
    fail(ErrorCode::invalid_argument,
         "finite_diff_check: builder must produce a scalar");
  }
  return v(0, 0);
}

}  // namespace

double finite_diff_check(const LossBuilder& build,
                         std::vector<Matrix> params, double step) {
  if (step <= 0.0) {
    fail(ErrorCode::invalid_argument, "finite_diff_check: step must be > 0");
  }

  // Analytic gradients from one recording pass.
  Tape tape;
  std::vector<ValueId> ids;
  ids.reserve(params.size());
  for (const Matrix& p : params) ids.push_back(tape.param(p));
  tape.backward(build(tape, ids));
  std::vector<Matrix> grads;
  grads.reserve(params.size());
  for (ValueId id : ids) grads.push_back(tape.grad(id));

  double max_rel = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double saved = params[p][i];
      params[p][i] = saved + step;
      const double up = evaluate(build, params);
      params[p][i] = saved - step;
      const double down = evaluate(build, params);
      params[p][i] = saved;

      const double fd = (up - down) / (2.0 * step);
      const double g = grads[p][i];
      const double denom =
          std::max({std::fabs(fd), std::fabs(g), 1e-8});
      max_rel = std::max(max_rel, std::fabs(fd - g) / denom);
    }
  }
  return max_rel;
}

}  // namespace cdt
