#pragma once

#include <functional>
#include <span>
#include <vector>

#include "jscc/autodiff.hpp"

namespace jscc::ad {

/// Builds a scalar-valued graph from leaf variables on a fresh tape.
using GraphFn = std::function<Var(Tape&, std::span<const Var>)>;

struct GradientCheckOptions {
  double step = 1e-6;
  /// Coordinates whose perturbation is rejected by this predicate are
  /// skipped (e.g. samples sitting on a non-differentiable kink).
  std::function<bool(std::size_t input, std::size_t index)> skip;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares reverse-mode gradients with central differences over every input
/// coordinate. The error of a coordinate is |analytic - numeric| /
/// max(|analytic|, 1e-8). Throws if `f` is not scalar-valued.
GradientCheckResult gradient_check(const GraphFn& f, const std::vector<RealGrid>& inputs,
                                   const GradientCheckOptions& options = {});

}  // namespace jscc::ad
