#pragma once

#include <functional>
#include <vector>

#include "core/tape.hpp"

namespace cdt {

// Builds a scalar loss on the given tape from parameter nodes registered in
// the same order as the supplied matrices.
using LossBuilder =
    std::function<ValueId(Tape&, const std::vector<ValueId>&)>;

// Central-difference check of the tape gradient. The same builder drives
// both sides: once on a recording tape for the analytic gradient, then twice
// per component for the finite difference. Returns the maximum relative
// error over all components, with denominator max(|g_fd|, |g_tape|, 1e-8).
double finite_diff_check(const LossBuilder& build,
                         std::vector<Matrix> params, double step);

}  // namespace cdt
