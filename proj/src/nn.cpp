#include "jscc/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace jscc {

ParamBlock& ModelParams::add(std::string name, RealGrid value) {
  if (contains(name)) throw std::invalid_argument("ModelParams: duplicate block name " + name);
  index_.emplace(name, blocks_.size());
  std::vector<double> grad(value.size(), 0.0);
  blocks_.push_back(ParamBlock{std::move(name), std::move(value), std::move(grad)});
  return blocks_.back();
}

ParamBlock& ModelParams::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("ModelParams: no block named " + name);
  return blocks_[it->second];
}

const ParamBlock& ModelParams::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("ModelParams: no block named " + name);
  return blocks_[it->second];
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += b.value.size();
  return n;
}

void ModelParams::zero_grad() {
  for (auto& b : blocks_) std::fill(b.grad.begin(), b.grad.end(), 0.0);
}

void ModelParams::round_to_float() {
  for (auto& b : blocks_) {
    for (double& v : b.value.values()) v = static_cast<double>(static_cast<float>(v));
  }
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (a.blocks_.size() != b.blocks_.size()) return false;
  for (std::size_t i = 0; i < a.blocks_.size(); ++i) {
    if (a.blocks_[i].name != b.blocks_[i].name || !(a.blocks_[i].value == b.blocks_[i].value)) {
      return false;
    }
  }
  return true;
}

BoundParams::BoundParams(ad::Tape& tape, const ModelParams& params, bool trainable)
    : tape_(tape), params_(params), trainable_(trainable) {}

ad::Var BoundParams::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const RealGrid& value = params_.at(name).value;
  ad::Var v = trainable_ ? tape_.leaf(value) : tape_.constant(value);
  bound_.emplace(name, v);
  return v;
}

void BoundParams::accumulate_grads(ModelParams& into) const {
  for (const auto& [name, var] : bound_) {
    auto g = tape_.grad(var);
    if (g.empty()) continue;
    auto& target = into.at(name).grad;
    for (std::size_t i = 0; i < g.size(); ++i) target[i] += g[i];
  }
}

ad::Var activate(ad::Var x, Activation act) {
  switch (act) {
    case Activation::none: return x;
    case Activation::relu: return ad::relu(x);
    case Activation::leaky_relu: return ad::leaky_relu(x, 0.2);
    case Activation::sigmoid: return ad::sigmoid(x);
  }
  return x;
}

namespace {

RealGrid he_normal(Shape shape, std::size_t fan_in, Rng& rng) {
  RealGrid w(std::move(shape));
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (double& v : w.values()) v = static_cast<double>(static_cast<float>(normal(rng)));
  return w;
}

}  // namespace

void add_conv(ModelParams& params, const std::string& prefix, std::size_t cout, std::size_t cin,
              std::size_t kernel, Rng& rng, bool zero) {
  Shape shape{cout, cin, kernel, kernel};
  params.add(prefix + ".weight", zero ? RealGrid(shape) : he_normal(shape, cin * kernel * kernel, rng));
  params.add(prefix + ".bias", RealGrid(Shape{cout}));
}

void add_conv_transpose(ModelParams& params, const std::string& prefix, std::size_t cin,
                        std::size_t cout, std::size_t kernel, Rng& rng) {
  // Each output pixel of a stride-2 transposed conv sees about cin * k^2 / 4 taps.
  const std::size_t fan_in = std::max<std::size_t>(1, cin * kernel * kernel / 4);
  params.add(prefix + ".weight", he_normal(Shape{cin, cout, kernel, kernel}, fan_in, rng));
  params.add(prefix + ".bias", RealGrid(Shape{cout}));
}

ad::Var conv_layer(BoundParams& p, const std::string& prefix, ad::Var x, ad::ConvOptions options,
                   Activation act) {
  return activate(ad::conv2d(x, p(prefix + ".weight"), p(prefix + ".bias"), options), act);
}

ad::Var conv_transpose_layer(BoundParams& p, const std::string& prefix, ad::Var x,
                             ad::ConvOptions options, Activation act) {
  return activate(ad::conv_transpose2d(x, p(prefix + ".weight"), p(prefix + ".bias"), options), act);
}

void Adam::step(ModelParams& params, double learning_rate, const BlockFilter& include) {
  const double t = static_cast<double>(++steps_);
  const double c1 = 1.0 - std::pow(options_.beta1, t);
  const double c2 = 1.0 - std::pow(options_.beta2, t);
  for (auto& block : params.blocks()) {
    if (include && !include(block.name)) continue;
    if (!m_.contains(block.name)) {
      m_.add(block.name, RealGrid(block.value.shape()));
      v_.add(block.name, RealGrid(block.value.shape()));
    }
    auto& m = m_.at(block.name).value;
    auto& v = v_.at(block.name).value;
    for (std::size_t i = 0; i < block.value.size(); ++i) {
      const double g = block.grad[i];
      m[i] = static_cast<float>(options_.beta1 * m[i] + (1.0 - options_.beta1) * g);
      v[i] = static_cast<float>(options_.beta2 * v[i] + (1.0 - options_.beta2) * g * g);
      const double update = learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + options_.epsilon);
      block.value[i] = static_cast<float>(block.value[i] - update);
    }
  }
}

void Adam::restore(ModelParams m, ModelParams v, std::uint64_t steps) {
  m_ = std::move(m);
  v_ = std::move(v);
  steps_ = steps;
}

}  // namespace jscc
