#include "addle/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace addle {

namespace {

double evaluate(const ScalarGraph& fn, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.constant(p));
  const Tensor& out = tape.value(fn(tape, vars));
  if (out.numel() != 1) throw std::invalid_argument("grad_check: function must be scalar-valued");
  return out[0];
}

}  // namespace

GradCheckResult grad_check(const ScalarGraph& fn, const std::vector<Tensor>& params, double eps,
                           const std::function<void(std::vector<Tensor>&)>& gradient_override) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& p : params) vars.push_back(tape.parameter(p));
    const Var out = fn(tape, vars);
    if (tape.value(out).numel() != 1) throw std::invalid_argument("grad_check: function must be scalar-valued");
    if (!std::isfinite(tape.value(out)[0])) throw std::runtime_error("grad_check: non-finite function value");
    tape.backward(out);
    for (Var v : vars) analytic.push_back(tape.grad(v));
  }
  if (gradient_override) gradient_override(analytic);

  GradCheckResult result;
  std::vector<Tensor> probe = params;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    for (std::size_t i = 0; i < probe[p].numel(); ++i) {
      const double original = probe[p][i];
      probe[p][i] = original + eps;
      const double plus = evaluate(fn, probe);
      probe[p][i] = original - eps;
      const double minus = evaluate(fn, probe);
      probe[p][i] = original;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[p][i];
      if (!std::isfinite(plus) || !std::isfinite(minus) || !std::isfinite(a)) {
        throw std::runtime_error("grad_check: non-finite value at parameter " + std::to_string(p) + ", entry " +
                                 std::to_string(i));
      }
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
      const double err = std::abs(a - numeric) / denom;
      if (err > result.max_relative_error) result = {err, p, i, a, numeric};
    }
  }
  return result;
}

}  // namespace addle
