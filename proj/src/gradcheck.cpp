#include "jscc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jscc::ad {

namespace {

double evaluate(const GraphFn& f, const std::vector<RealGrid>& inputs) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const RealGrid& g : inputs) vars.push_back(tape.constant(g));
  Var out = f(tape, vars);
  if (out.size() != 1) {
    throw std::invalid_argument("gradient_check: function output must be scalar, got shape " +
                                to_string(out.shape()));
  }
  return out.value()[0];
}

}  // namespace

GradientCheckResult gradient_check(const GraphFn& f, const std::vector<RealGrid>& inputs,
                                   const GradientCheckOptions& options) {
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const RealGrid& g : inputs) vars.push_back(tape.leaf(g));
    Var out = f(tape, vars);
    if (out.size() != 1) {
      throw std::invalid_argument("gradient_check: function output must be scalar, got shape " +
                                  to_string(out.shape()));
    }
    tape.backward(out);
    for (const Var& v : vars) {
      auto g = tape.grad(v);
      analytic.emplace_back(v.size(), 0.0);
      std::copy(g.begin(), g.end(), analytic.back().begin());
    }
  }

  GradientCheckResult result;
  std::vector<RealGrid> probe = inputs;
  for (std::size_t in = 0; in < inputs.size(); ++in) {
    for (std::size_t i = 0; i < inputs[in].size(); ++i) {
      if (options.skip && options.skip(in, i)) continue;
      const double x0 = inputs[in][i];
      probe[in][i] = x0 + options.step;
      const double up = evaluate(f, probe);
      probe[in][i] = x0 - options.step;
      const double down = evaluate(f, probe);
      probe[in][i] = x0;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[in][i];
      const double err = std::abs(a - numeric) / std::max(std::abs(a), 1e-8);
      ++result.coordinates;
      if (result.coordinates == 1 || err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_input = in;
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace jscc::ad
