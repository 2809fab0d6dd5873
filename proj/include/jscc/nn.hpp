#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "jscc/autodiff.hpp"
#include "jscc/grid.hpp"
#include "jscc/rng.hpp"

namespace jscc {

/// A named trainable tensor plus its gradient accumulator.
struct ParamBlock {
  std::string name;
  RealGrid value;
  std::vector<double> grad;
};

/// Ordered collection of parameter blocks with unique names.
class ModelParams {
 public:
  ParamBlock& add(std::string name, RealGrid value);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  ParamBlock& at(const std::string& name);
  const ParamBlock& at(const std::string& name) const;

  std::vector<ParamBlock>& blocks() noexcept { return blocks_; }
  const std::vector<ParamBlock>& blocks() const noexcept { return blocks_; }
  std::size_t parameter_count() const;

  void zero_grad();
  /// Rounds every value to the nearest 32-bit float so that checkpoints,
  /// which store 32-bit values, round-trip exactly.
  void round_to_float();

  friend bool operator==(const ModelParams& a, const ModelParams& b);

 private:
  std::vector<ParamBlock> blocks_;
  std::map<std::string, std::size_t> index_;
};

/// Parameter blocks bound to a tape. Blocks are attached lazily on first use,
/// as leaves when trainable and as constants otherwise.
class BoundParams {
 public:
  BoundParams(ad::Tape& tape, const ModelParams& params, bool trainable);

  ad::Var operator()(const std::string& name);
  bool contains(const std::string& name) const { return params_.contains(name); }
  ad::Tape& tape() noexcept { return tape_; }
  bool trainable() const noexcept { return trainable_; }

  /// Adds the gradients collected by the last backward() into `into`.
  void accumulate_grads(ModelParams& into) const;

 private:
  ad::Tape& tape_;
  const ModelParams& params_;
  bool trainable_;
  std::map<std::string, ad::Var> bound_;
};

enum class Activation { none, relu, leaky_relu, sigmoid };

ad::Var activate(ad::Var x, Activation act);

/// Adds "<prefix>.weight" (Cout, Cin, k, k) and "<prefix>.bias" (Cout) with
/// He-normal weights. `zero` initializes both to zero.
void add_conv(ModelParams& params, const std::string& prefix, std::size_t cout, std::size_t cin,
              std::size_t kernel, Rng& rng, bool zero = false);
/// Transposed-conv variant: weight is (Cin, Cout, k, k).
void add_conv_transpose(ModelParams& params, const std::string& prefix, std::size_t cin,
                        std::size_t cout, std::size_t kernel, Rng& rng);

ad::Var conv_layer(BoundParams& p, const std::string& prefix, ad::Var x, ad::ConvOptions options,
                   Activation act);
ad::Var conv_transpose_layer(BoundParams& p, const std::string& prefix, ad::Var x,
                             ad::ConvOptions options, Activation act);

struct AdamOptions {
  double learning_rate = 5e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moments live in ModelParams containers keyed
/// like the parameters so they can be checkpointed the same way.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  using BlockFilter = std::function<bool(const std::string&)>;

  /// Applies one update to every block accepted by `include` (all when empty).
  void step(ModelParams& params, double learning_rate, const BlockFilter& include = {});

  const AdamOptions& options() const noexcept { return options_; }
  std::uint64_t steps() const noexcept { return steps_; }
  ModelParams& first_moment() noexcept { return m_; }
  ModelParams& second_moment() noexcept { return v_; }
  const ModelParams& first_moment() const noexcept { return m_; }
  const ModelParams& second_moment() const noexcept { return v_; }
  void restore(ModelParams m, ModelParams v, std::uint64_t steps);

 private:
  AdamOptions options_;
  std::uint64_t steps_ = 0;
  ModelParams m_;
  ModelParams v_;
};

}  // namespace jscc
