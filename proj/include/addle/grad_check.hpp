#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "addle/tape.hpp"

namespace addle {

// Builds a scalar on the tape from the supplied parameter handles.
using ScalarGraph = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_entry = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares tape gradients against central differences. The relative error of
// one entry is |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).
// `gradient_override`, when set, replaces the tape gradients (used to check the
// checker itself).
GradCheckResult grad_check(const ScalarGraph& fn, const std::vector<Tensor>& params, double eps,
                           const std::function<void(std::vector<Tensor>&)>& gradient_override = {});

}  // namespace addle
