#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "jscc/autodiff.hpp"
#include "jscc/gradcheck.hpp"
#include "jscc/gradient_suite.hpp"
#include "test_util.hpp"

using namespace jscc;
using namespace jscc::ad;
using testutil::grid;
using testutil::randn;

TEST_CASE("sigmoid at zero is one half") {
  Tape t;
  CHECK(sigmoid(t.constant(RealGrid::scalar(0.0))).value().item() == 0.5);
}

TEST_CASE("complex multiply of 1 and i") {
  Tape t;
  Var r = complex_mul(t.constant(grid({2}, {1, 0})), t.constant(grid({2}, {0, 1})));
  CHECK(r.value()[0] == 0.0);
  CHECK(r.value()[1] == 1.0);
}

TEST_CASE("relu backward takes the right-limit subgradient") {
  Tape t;
  Var x = t.leaf(grid({3}, {-1, 2, 0}));
  t.backward(sum(relu(x)));
  auto g = t.grad(x);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 1.0);
  CHECK(g[2] == 1.0);
}

TEST_CASE("conv2d with a unit 1x1 kernel is the identity") {
  Tape t;
  RealGrid in = randn({1, 5, 5}, 3);
  Var out = conv2d(t.constant(in), t.constant(grid({1, 1, 1, 1}, {1})), std::nullopt, {1, 0});
  CHECK(out.value() == in);
}

TEST_CASE("all-ones 3x3 kernel over ones sums nine at the centre") {
  Tape t;
  Var out = conv2d(t.constant(RealGrid({1, 4, 4}, 1.0)), t.constant(RealGrid({1, 1, 3, 3}, 1.0)),
                   std::nullopt, {1, 1});
  REQUIRE(out.shape() == Shape{1, 4, 4});
  CHECK(out.value()[1 * 4 + 1] == 9.0);
  CHECK(out.value()[0] == 4.0);
  CHECK(out.value()[1] == 6.0);
}

TEST_CASE("conv2d rejects a non-integral output extent") {
  Tape t;
  CHECK_THROWS_AS(conv2d(t.constant(RealGrid({1, 5, 5})), t.constant(RealGrid({1, 1, 2, 2})),
                         std::nullopt, {2, 0}),
                  std::invalid_argument);
}

TEST_CASE("conv_transpose2d is the adjoint of conv2d") {
  // <conv(x), y> == <x, conv_T(y)> for a shared kernel layout.
  RealGrid x = randn({2, 8, 8}, 11), y = randn({3, 4, 4}, 12);
  RealGrid k = randn({3, 2, 4, 4}, 13);
  Tape t;
  Var cx = conv2d(t.constant(x), t.constant(k), std::nullopt, {2, 1});
  Var ty = conv_transpose2d(t.constant(y), t.constant(k), std::nullopt, {2, 1});
  REQUIRE(ty.shape() == x.shape());
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < y.size(); ++i) lhs += cx.value()[i] * y[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * ty.value()[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("random conv2d passes the finite-difference check") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    GraphFn f = [](Tape& t, std::span<const Var> in) {
      Var out = conv2d(in[0], in[1], std::nullopt, {1, 1});
      return sum(mul(out, t.constant(RealGrid(out.shape(), 0.7))));
    };
    auto r = gradient_check(f, {randn({2, 6, 6}, seed, 0.3), randn({3, 2, 3, 3}, seed + 100, 0.3)});
    CHECK(r.max_relative_error < 1e-5);
    CHECK(r.coordinates == 72 + 54);
  }
}

TEST_CASE("gradient check of a quadratic") {
  GraphFn f = [](Tape&, std::span<const Var> in) { return sum(square(in[0])); };
  auto r = gradient_check(f, {grid({2}, {1, 2})});
  CHECK(r.max_relative_error < 1e-7);
  Tape t;
  Var x = t.leaf(grid({2}, {1, 2}));
  t.backward(sum(square(x)));
  CHECK(t.grad(x)[0] == doctest::Approx(2.0));
  CHECK(t.grad(x)[1] == doctest::Approx(4.0));
}

TEST_CASE("gradient check rejects non-scalar outputs") {
  GraphFn f = [](Tape&, std::span<const Var> in) { return square(in[0]); };
  CHECK_THROWS_AS(gradient_check(f, {grid({2}, {1, 2})}), std::invalid_argument);
}

TEST_CASE("division by zero is an error") {
  Tape t;
  CHECK_THROWS_AS(div(t.constant(grid({2}, {1, 1})), t.constant(grid({2}, {1, 0}))),
                  std::domain_error);
}

TEST_CASE("incompatible broadcast shapes are rejected") {
  Tape t;
  CHECK_THROWS_AS(add(t.constant(RealGrid({3, 4})), t.constant(RealGrid({3}))),
                  std::invalid_argument);
  CHECK(broadcast_shape({3, 1, 4}, {5, 1}) == Shape{3, 5, 4});
}

TEST_CASE("backward visits each node once") {
  Tape t;
  Var x = t.leaf(randn({4}, 1));
  Var y = mul(x, x);
  Var z = add(y, x);
  Var out = sum(add(z, y));
  t.backward(out);
  CHECK(t.last_backward_visits() == t.size());
  auto g = t.grad(x);
  const RealGrid& xv = x.value();
  for (std::size_t i = 0; i < 4; ++i) CHECK(g[i] == doctest::Approx(4 * xv[i] + 1));
}

TEST_CASE("forward replay is deterministic and leaves gradients alone") {
  RealGrid in = randn({2, 6, 6}, 9), k = randn({3, 2, 3, 3}, 10);
  Tape t;
  Var x = t.leaf(in);
  Var a = conv2d(x, t.constant(k), std::nullopt, {1, 1});
  t.backward(sum(a));
  const std::vector<double> before(t.grad(x).begin(), t.grad(x).end());
  Var b = conv2d(x, t.constant(k), std::nullopt, {1, 1});
  CHECK(a.value() == b.value());
  const std::vector<double> after(t.grad(x).begin(), t.grad(x).end());
  CHECK(before == after);
}

TEST_CASE("DFT followed by IDFT is the identity") {
  RealGrid z = randn({3, 16, 2}, 4);
  Tape t;
  Var back = idft(dft(t.constant(z)));
  CHECK(testutil::max_abs_diff(back.value(), z) < 1e-12);
}

TEST_CASE("DFT matches the brute-force transform with unitary scaling") {
  RealGrid z = randn({8, 2}, 5);
  Tape t;
  auto fast = testutil::to_complex(dft(t.constant(z)).value());
  auto ref = testutil::brute_dft(testutil::to_complex(z), 8);
  for (std::size_t k = 0; k < 8; ++k) CHECK(std::abs(fast[k] - ref[k] / std::sqrt(8.0)) < 1e-12);
}

TEST_CASE("clip_amplitude never exceeds the threshold and keeps the phase") {
  Tape t;
  RealGrid z = randn({1000, 2}, 6, 2.0);
  Var out = clip_amplitude(t.constant(z), t.constant(RealGrid::scalar(0.7)));
  for (std::size_t k = 0; k < 1000; ++k) {
    const double re = out.value()[2 * k], im = out.value()[2 * k + 1];
    CHECK(std::hypot(re, im) <= 0.7);
    if (std::hypot(z[2 * k], z[2 * k + 1]) > 0.7) {
      CHECK(std::atan2(im, re) == doctest::Approx(std::atan2(z[2 * k + 1], z[2 * k])).epsilon(1e-12));
    }
  }
}

TEST_CASE("every op in the oracle suite passes on five seeds") {
  for (const auto& op : gradient_suite_ops()) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const OpCheck r = check_op(op, seed);
      INFO(op << " seed " << seed << " analytic " << r.worst_analytic << " numeric " << r.worst_numeric);
      CHECK(r.passed());
      CHECK(r.coordinates > 0);
    }
  }
}
