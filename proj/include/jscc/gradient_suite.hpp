#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace jscc {

inline constexpr double kGradientTolerance = 1e-5;

struct OpCheck {
  std::string op;
  std::uint64_t seed = 0;
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool passed() const { return max_relative_error < kGradientTolerance; }
};

/// Names of every differentiable building block covered by the suite.
std::vector<std::string> gradient_suite_ops();

/// Finite-difference check of one op on random 64-bit inputs drawn from `seed`.
OpCheck check_op(const std::string& op, std::uint64_t seed);

/// Every op on seeds 1..seeds.
std::vector<OpCheck> run_gradient_suite(std::size_t seeds);

}  // namespace jscc
