#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

#include "jscc/grid.hpp"

// Reverse-mode differentiation over RealGrid values.
//
// A Tape records every operation applied to its variables. Nodes are appended
// in evaluation order, so creation order is a topological order and backward
// simply walks the node list from the root down to zero.
namespace jscc::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const RealGrid& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  std::size_t id() const noexcept { return id_; }
  Tape& tape() const { return *tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Called during backward with the tape and the id of the node being
  /// visited. Reads the node's output gradient and accumulates into inputs.
  using Backward = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Non-differentiable input.
  Var constant(RealGrid value);
  /// Differentiable input; its gradient is readable after backward().
  Var leaf(RealGrid value);

  /// Appends an op node. The backward function is dropped when no input
  /// requires a gradient.
  Var record(RealGrid value, std::initializer_list<Var> inputs, Backward backward);
  Var record(RealGrid value, std::span<const Var> inputs, Backward backward);

  /// Seeds d(root)/d(root) = 1 and propagates to every reachable node.
  /// Gradients from any previous backward call are cleared first.
  void backward(Var root);

  const RealGrid& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  /// Gradient of a node after backward(); empty if it was never reached.
  std::span<const double> grad(Var v) const;

  /// For backward functions: gradient flowing into node `self`.
  std::span<const double> output_grad(std::size_t self) const;
  /// For backward functions: accumulator of input `id`, or an empty span
  /// when that input does not require a gradient.
  std::span<double> input_grad(std::size_t id);

  std::size_t size() const noexcept { return nodes_.size(); }
  /// Number of node visits performed by the most recent backward().
  std::size_t last_backward_visits() const noexcept { return visits_; }

 private:
  struct Node {
    RealGrid value;
    Backward backward;
    bool requires_grad = false;
  };

  // deque: references returned by value() survive later appends.
  std::deque<Node> nodes_;
  std::size_t visits_ = 0;
};

Tape& same_tape(std::initializer_list<Var> vars);

// --- elementwise, with numpy-style broadcasting for binary ops ------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// Throws std::domain_error if any denominator is exactly zero.
Var div(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);

Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var sigmoid(Var a);
Var tanh(Var a);
Var square(Var a);
/// Throws std::domain_error for negative inputs.
Var sqrt(Var a);
Var softplus(Var a);

enum class Unary { relu, sigmoid, tanh, square, sqrt, softplus };
enum class Binary { add, sub, mul, div };
Var elementwise(Unary kind, Var a);
Var elementwise(Binary kind, Var a, Var b);

/// Output shape of broadcasting `a` against `b`; throws on incompatibility.
Shape broadcast_shape(const Shape& a, const Shape& b);

// --- reductions and layout ---------------------------------------------------

Var sum(Var a);
Var mean(Var a);
/// Sums over axis 0.
Var sum_rows(Var a);
Var reshape(Var a, Shape shape);
/// Concatenates along axis 0; trailing extents must agree.
Var concat_rows(std::span<const Var> parts);
Var concat_rows(std::initializer_list<Var> parts);
/// Rows [begin, end) along axis 0.
Var slice_rows(Var a, std::size_t begin, std::size_t end);

// --- complex values on interleaved pairs (trailing axis of extent 2) ----------

/// (2, ...) real/imag planes -> (..., 2) interleaved.
Var planes_to_complex(Var a);
/// (..., 2) interleaved -> (2, ...) real/imag planes.
Var complex_to_planes(Var a);
Var complex_mul(Var a, Var b);
/// a * conj(b).
Var complex_conj_mul(Var a, Var b);
Var complex_conj(Var a);
/// |z|^2; drops the trailing pair axis.
Var complex_abs2(Var a);

/// Unitary DFT over the last complex axis: (..., N, 2).
Var dft(Var a);
/// Unitary inverse DFT over the last complex axis.
Var idft(Var a);
/// (S, N, 2) -> (S, N + cp, 2), prepending the last `cp` samples of each row.
Var add_cyclic_prefix(Var a, std::size_t cp);
/// (S, N + cp, 2) -> (S, N, 2).
Var remove_cyclic_prefix(Var a, std::size_t cp);

/// Causal complex FIR filter truncated to the input length:
/// out[n] = sum_l taps[l] * in[n - l]. `taps` is (L, 2), `in` is (N, 2).
Var causal_filter(Var in, const RealGrid& taps);

/// Phase-preserving amplitude clamp of complex samples (N, 2) at a scalar
/// threshold. Samples exactly at the threshold take the clamped-branch
/// derivative. The clamped amplitude never exceeds the threshold.
Var clip_amplitude(Var in, Var threshold);

// --- convolution -----------------------------------------------------------

struct ConvOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// Cross-correlation: input (Cin, H, W), kernel (Cout, Cin, kH, kW),
/// bias (Cout). Throws if (H + 2p - kH) is not a multiple of the stride.
Var conv2d(Var input, Var kernel, std::optional<Var> bias, ConvOptions options);

/// Adjoint of conv2d: input (Cin, H, W), kernel (Cin, Cout, kH, kW),
/// output (Cout, (H-1)s - 2p + kH, (W-1)s - 2p + kW).
Var conv_transpose2d(Var input, Var kernel, std::optional<Var> bias, ConvOptions options);

}  // namespace jscc::ad
