#include "jscc/gradient_suite.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>

#include "jscc/channel.hpp"
#include "jscc/gradcheck.hpp"
#include "jscc/models.hpp"
#include "jscc/ofdm.hpp"
#include "jscc/precoding.hpp"
#include "jscc/receiver.hpp"
#include "jscc/rng.hpp"

namespace jscc {

namespace {

using ad::Tape;
using ad::Var;
using Inputs = std::span<const Var>;

struct Case {
  ad::GraphFn f;
  std::vector<RealGrid> inputs;
  ad::GradientCheckOptions options;
};

RealGrid randn(Shape shape, Rng& rng, double scale = 0.3) {
  std::normal_distribution<double> n(0.0, scale);
  RealGrid g(std::move(shape));
  for (double& v : g.values()) v = n(rng);
  return g;
}

RealGrid uniform(Shape shape, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  RealGrid g(std::move(shape));
  for (double& v : g.values()) v = u(rng);
  return g;
}

// Keeps inputs clear of kinks at zero.
RealGrid away_from_zero(Shape shape, Rng& rng, double margin = 0.05) {
  RealGrid g = randn(std::move(shape), rng);
  for (double& v : g.values()) {
    if (std::abs(v) < margin) v = v < 0 ? v - margin : v + margin;
  }
  return g;
}

// Random linear functional so every output coordinate contributes. Weights
// are bounded away from zero and drawn from their own stream.
std::function<Var(Var)> projector(std::uint64_t seed) {
  return [seed](Var out) {
    Rng rng(derive_seed(seed, {0x70726f6a}));
    RealGrid w = uniform(out.shape(), rng, 0.5, 1.5);
    std::bernoulli_distribution flip(0.5);
    for (double& v : w.values()) v = flip(rng) ? -v : v;
    return ad::sum(ad::mul(out, out.tape().constant(std::move(w))));
  };
}

Case unary(std::function<Var(Var)> op, RealGrid input, std::uint64_t seed) {
  auto project = projector(seed);
  return {[op, project](Tape&, Inputs in) { return project(op(in[0])); }, {std::move(input)}, {}};
}

Case binary(std::function<Var(Var, Var)> op, RealGrid a, RealGrid b, std::uint64_t seed) {
  auto project = projector(seed);
  return {[op, project](Tape&, Inputs in) { return project(op(in[0], in[1])); },
          {std::move(a), std::move(b)}, {}};
}

// Complex samples whose amplitudes stay at least `gap` (relative) away from
// the clipping threshold ratio * sqrt(P_s).
RealGrid clip_input(std::size_t n, double ratio, Rng& rng) {
  for (;;) {
    RealGrid g = randn(Shape{n, 2}, rng, std::sqrt(0.5));
    double power = 0.0;
    for (double v : g.values()) power += v * v;
    const double t = ratio * std::sqrt(power / static_cast<double>(n));
    bool ok = true;
    for (std::size_t k = 0; k < n && ok; ++k) {
      ok = std::abs(std::hypot(g[2 * k], g[2 * k + 1]) - t) > 1e-3 * t;
    }
    if (ok) return g;
  }
}

void randomize_head(ModelParams& params, const std::string& prefix, Rng& rng) {
  for (const char* suffix : {".conv2.weight", ".conv2.bias"}) {
    RealGrid& v = params.at(prefix + suffix).value;
    v = randn(v.shape(), rng, 1.0);
  }
}

Architecture toy_architecture(DecoderMode mode) {
  Architecture a;
  a.image_size = 4;
  a.downsample = 1;
  a.width = 4;
  a.res_blocks = 1;
  a.subnet_width = 4;
  a.mode = mode;
  a.ofdm = OfdmConfig{4, 1, 1, 1, 0x5eed};
  return a;
}

Case full_link(DecoderMode mode, std::uint64_t seed) {
  const Architecture arch = toy_architecture(mode);
  auto params = std::make_shared<ModelParams>(build_model(arch, seed));
  Rng rng(seed);
  for (const char* prefix : {"ce_subnet", "eq_subnet"}) {
    if (params->contains(std::string(prefix) + ".conv2.weight")) randomize_head(*params, prefix, rng);
  }
  const ChannelRealization channel =
      sample_channel(ChannelProfile(2, 4.0), noise_variance_for_snr(10.0), seed);
  return {[arch, params, channel, seed](Tape& tape, Inputs in) {
            BoundParams p(tape, *params, false);
            LinkOutput out = run_link(p, arch, in[0], channel, seed + 2);
            return reconstruction_loss(tape.constant(RealGrid(arch.image_shape(), 0.5)),
                                       out.reconstruction);
          },
          {uniform(arch.image_shape(), rng, 0.1, 0.9)},
          {}};
}

Case subnet_case(const std::string& which, std::uint64_t seed) {
  Rng rng(seed);
  auto params = std::make_shared<ModelParams>();
  const std::size_t n = 2;
  if (which == "ce") add_subnet(*params, "s", 2 + 4 * n, 2, 4, rng);
  else if (which == "eq") add_subnet(*params, "s", 4 * n + 2, 2 * n, 4, rng);
  else add_precoder(*params, "s", n, 4, rng);
  randomize_head(*params, "s", rng);
  auto project = projector(seed + 1);
  std::vector<RealGrid> inputs;
  if (which == "ce") {
    inputs = {randn({16, 2}, rng), randn({n, 16, 2}, rng), randn({n, 16, 2}, rng)};
  } else if (which == "eq") {
    inputs = {randn({n, 16, 2}, rng), randn({16, 2}, rng), randn({n, 16, 2}, rng)};
  } else {
    inputs = {randn({n, 16, 2}, rng), randn({16, 2}, rng)};
  }
  return {[which, params, project](Tape& tape, Inputs in) {
            BoundParams p(tape, *params, false);
            if (which == "ce") return project(refine_channel(p, "s", in[0], in[1], in[2]));
            if (which == "eq") return project(refine_equalized(p, "s", in[0], in[1], in[2]));
            return project(precode(p, "s", in[0], in[1]));
          },
          std::move(inputs),
          {}};
}

using Builder = std::function<Case(std::uint64_t)>;

const std::map<std::string, Builder>& builders() {
  static const std::map<std::string, Builder> table = {
      {"add", [](std::uint64_t s) { Rng r(s); return binary(ad::add, randn({3, 4}, r), randn({4}, r), s); }},
      {"sub", [](std::uint64_t s) { Rng r(s); return binary(ad::sub, randn({3, 4}, r), randn({3, 1}, r), s); }},
      {"mul", [](std::uint64_t s) { Rng r(s); return binary(ad::mul, randn({2, 3, 4}, r), randn({3, 4}, r), s); }},
      {"div",
       [](std::uint64_t s) {
         Rng r(s);
         RealGrid b = randn({3, 4}, r);
         for (double& v : b.values()) v = (v < 0 ? -0.5 : 0.5) + v;
         return binary(ad::div, randn({3, 4}, r), b, s);
       }},
      {"scale", [](std::uint64_t s) {
         Rng r(s);
         return unary([](Var a) { return ad::add_scalar(ad::scale(a, -1.7), 0.3); }, randn({5}, r), s);
       }},
      {"relu", [](std::uint64_t s) { Rng r(s); return unary(ad::relu, away_from_zero({4, 5}, r), s); }},
      {"leaky_relu", [](std::uint64_t s) {
         Rng r(s);
         return unary([](Var a) { return ad::leaky_relu(a, 0.2); }, away_from_zero({4, 5}, r), s);
       }},
      {"sigmoid", [](std::uint64_t s) { Rng r(s); return unary(ad::sigmoid, randn({4, 5}, r, 2.0), s); }},
      {"tanh", [](std::uint64_t s) { Rng r(s); return unary(ad::tanh, randn({4, 5}, r), s); }},
      {"square", [](std::uint64_t s) { Rng r(s); return unary(ad::square, away_from_zero({4, 5}, r, 0.2), s); }},
      {"sqrt", [](std::uint64_t s) { Rng r(s); return unary(ad::sqrt, uniform({4, 5}, r, 0.5, 2.0), s); }},
      {"softplus", [](std::uint64_t s) { Rng r(s); return unary(ad::softplus, randn({4, 5}, r, 2.0), s); }},
      {"mean", [](std::uint64_t s) {
         Rng r(s);
         return Case{[](Tape&, Inputs in) { return ad::mean(ad::square(in[0])); }, {randn({3, 5}, r)}, {}};
       }},
      {"sum_rows", [](std::uint64_t s) { Rng r(s); return unary(ad::sum_rows, randn({3, 4, 2}, r), s); }},
      {"concat_slice", [](std::uint64_t s) {
         Rng r(s);
         return binary([](Var a, Var b) {
           return ad::slice_rows(ad::concat_rows({a, ad::reshape(b, Shape{2, 4})}), 1, 4);
         }, randn({3, 4}, r), randn({8}, r), s);
       }},
      {"planes_to_complex", [](std::uint64_t s) { Rng r(s); return unary(ad::planes_to_complex, randn({2, 3, 4}, r), s); }},
      {"complex_to_planes", [](std::uint64_t s) { Rng r(s); return unary(ad::complex_to_planes, randn({3, 4, 2}, r), s); }},
      {"complex_mul", [](std::uint64_t s) { Rng r(s); return binary(ad::complex_mul, randn({3, 4, 2}, r), randn({4, 2}, r), s); }},
      {"complex_conj_mul", [](std::uint64_t s) { Rng r(s); return binary(ad::complex_conj_mul, randn({3, 4, 2}, r), randn({4, 2}, r), s); }},
      {"complex_conj", [](std::uint64_t s) { Rng r(s); return unary(ad::complex_conj, randn({5, 2}, r), s); }},
      {"complex_abs2", [](std::uint64_t s) { Rng r(s); return unary(ad::complex_abs2, randn({3, 5, 2}, r), s); }},
      {"dft", [](std::uint64_t s) { Rng r(s); return unary(ad::dft, randn({3, 8, 2}, r), s); }},
      {"idft", [](std::uint64_t s) { Rng r(s); return unary(ad::idft, randn({3, 8, 2}, r), s); }},
      {"add_cyclic_prefix", [](std::uint64_t s) {
         Rng r(s);
         return unary([](Var a) { return ad::add_cyclic_prefix(a, 3); }, randn({2, 8, 2}, r), s);
       }},
      {"remove_cyclic_prefix", [](std::uint64_t s) {
         Rng r(s);
         return unary([](Var a) { return ad::remove_cyclic_prefix(a, 3); }, randn({2, 11, 2}, r), s);
       }},
      {"causal_filter", [](std::uint64_t s) {
         Rng r(s);
         RealGrid taps = randn({4, 2}, r);
         return unary([taps](Var a) { return ad::causal_filter(a, taps); }, randn({16, 2}, r), s);
       }},
      {"channel", [](std::uint64_t s) {
         Rng r(s);
         const auto ch = sample_channel(ChannelProfile(8, 4.0), 0.1, s);
         return unary([ch, s](Var a) { return apply_channel(a, ch, s + 1); }, randn({24, 2}, r), s);
       }},
      {"power_normalize", [](std::uint64_t s) { Rng r(s); return unary(power_normalize, randn({3, 8, 2}, r), s); }},
      {"clip", [](std::uint64_t s) {
         Rng r(s);
         return unary([](Var a) { return clip(a, 0.9); }, clip_input(32, 0.9, r), s);
       }},
      {"clip_unnormalized", [](std::uint64_t s) {
         Rng r(s);
         return unary([](Var a) { return clip_unnormalized(a, 1.1); }, clip_input(32, 1.1, r), s);
       }},
      {"conv2d", [](std::uint64_t s) {
         Rng r(s);
         auto project = projector(s);
         return Case{[project](Tape&, Inputs in) {
                       return project(ad::conv2d(in[0], in[1], in[2], {1, 1}));
                     },
                     {randn({2, 6, 6}, r), randn({3, 2, 3, 3}, r), randn({3}, r)}, {}};
       }},
      {"conv2d_stride2", [](std::uint64_t s) {
         Rng r(s);
         auto project = projector(s);
         return Case{[project](Tape&, Inputs in) {
                       return project(ad::conv2d(in[0], in[1], std::nullopt, {2, 1}));
                     },
                     {randn({2, 8, 8}, r), randn({3, 2, 4, 4}, r)}, {}};
       }},
      {"conv_transpose2d", [](std::uint64_t s) {
         Rng r(s);
         auto project = projector(s);
         return Case{[project](Tape&, Inputs in) {
                       return project(ad::conv_transpose2d(in[0], in[1], in[2], {2, 1}));
                     },
                     {randn({3, 4, 4}, r), randn({3, 2, 4, 4}, r), randn({2}, r)}, {}};
       }},
      {"mmse_channel_estimate", [](std::uint64_t s) {
         Rng r(s);
         return binary([](Var rx, Var tx) { return mmse_channel_estimate(rx, tx, 0.1); },
                       randn({2, 16, 2}, r), randn({2, 16, 2}, r), s);
       }},
      {"mmse_equalize", [](std::uint64_t s) {
         Rng r(s);
         return binary([](Var y, Var h) { return mmse_equalize(y, h, 0.1); }, randn({3, 16, 2}, r),
                       randn({16, 2}, r), s);
       }},
      {"fold_planes", [](std::uint64_t s) { Rng r(s); return unary(fold_planes, randn({2, 16, 2}, r), s); }},
      {"unfold_planes", [](std::uint64_t s) { Rng r(s); return unary(unfold_planes, randn({4, 4, 4}, r), s); }},
      {"ce_subnet", [](std::uint64_t s) { return subnet_case("ce", s); }},
      {"eq_subnet", [](std::uint64_t s) { return subnet_case("eq", s); }},
      {"precoder", [](std::uint64_t s) { return subnet_case("precoder", s); }},
      {"map_symbols", [](std::uint64_t s) {
         Rng r(s);
         const OfdmConfig cfg{16, 4, 1, 2, 0x5eed};
         return unary([cfg](Var a) { return map_symbols(a, cfg); }, randn({4, 4, 4}, r), s);
       }},
      {"modulate", [](std::uint64_t s) {
         Rng r(s);
         const OfdmConfig cfg{16, 4, 1, 2, 0x5eed};
         auto project = projector(s);
         return Case{[cfg, project](Tape& tape, Inputs in) {
                       return project(modulate(in[0], tape.constant(pilot_symbols(cfg)), cfg));
                     },
                     {randn({2, 16, 2}, r)}, {}};
       }},
      {"demodulate", [](std::uint64_t s) {
         Rng r(s);
         const OfdmConfig cfg{16, 4, 1, 2, 0x5eed};
         auto pa = projector(s), pb = projector(s + 1);
         return Case{[cfg, pa, pb](Tape&, Inputs in) {
                       Demodulated d = demodulate(in[0], cfg);
                       return ad::add(pa(d.pilots), pb(d.data));
                     },
                     {randn({cfg.packet_length(), 2}, r)}, {}};
       }},
      {"reconstruction_loss", [](std::uint64_t s) {
         Rng r(s);
         return Case{[](Tape&, Inputs in) { return reconstruction_loss(in[0], in[1]); },
                     {uniform({3, 4, 4}, r, 0, 1), uniform({3, 4, 4}, r, 0, 1)}, {}};
       }},
      {"channel_loss", [](std::uint64_t s) {
         Rng r(s);
         return Case{[](Tape&, Inputs in) { return channel_loss(in[0], in[1]); },
                     {randn({16, 2}, r), randn({16, 2}, r)}, {}};
       }},
      {"lsgan", [](std::uint64_t s) {
         Rng r(s);
         return Case{[](Tape&, Inputs in) {
                       return ad::add(lsgan_discriminator_loss(in[0], in[1]),
                                      ad::scale(lsgan_generator_loss(in[1]), 0.7));
                     },
                     {randn({}, r), randn({}, r)}, {}};
       }},
      {"link_subnets", [](std::uint64_t s) { return full_link(DecoderMode::ofdm_ce_eq_subnets, s); }},
      {"link_blackbox", [](std::uint64_t s) { return full_link(DecoderMode::ofdm_blackbox, s); }},
      {"link_feedback", [](std::uint64_t s) { return full_link(DecoderMode::ofdm_feedback, s); }},
      {"link_direct", [](std::uint64_t s) { return full_link(DecoderMode::direct, s); }},
  };
  return table;
}

}  // namespace

std::vector<std::string> gradient_suite_ops() {
  std::vector<std::string> names;
  for (const auto& [name, _] : builders()) names.push_back(name);
  return names;
}

OpCheck check_op(const std::string& op, std::uint64_t seed) {
  auto it = builders().find(op);
  if (it == builders().end()) throw std::invalid_argument("gradient suite: unknown op " + op);
  Case c = it->second(derive_seed(seed, {0x67726164}));
  const auto result = ad::gradient_check(c.f, c.inputs, c.options);
  return {op, seed, result.max_relative_error, result.coordinates, result.worst_analytic,
          result.worst_numeric};
}

std::vector<OpCheck> run_gradient_suite(std::size_t seeds) {
  std::vector<OpCheck> out;
  for (const auto& name : gradient_suite_ops()) {
    for (std::uint64_t s = 1; s <= seeds; ++s) out.push_back(check_op(name, s));
  }
  return out;
}

}  // namespace jscc
