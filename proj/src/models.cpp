#include "jscc/models.hpp"

#include <cmath>
#include <stdexcept>

#include "jscc/precoding.hpp"
#include "jscc/receiver.hpp"
#include "jscc/rng.hpp"

namespace jscc {

namespace {

constexpr ad::ConvOptions kSame3{1, 1};
constexpr ad::ConvOptions kDown{2, 1};  // k4 s2 p1 halves the extent
constexpr ad::ConvOptions kUp{2, 1};

std::size_t isqrt_exact(std::size_t n) {
  const auto r = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n))));
  return r * r == n ? r : 0;
}

ad::Var to_signed(ad::Var image) { return ad::add_scalar(ad::scale(image, 2.0), -1.0); }

void add_res_blocks(ModelParams& params, const std::string& prefix, std::size_t count,
                    std::size_t width, Rng& rng) {
  for (std::size_t r = 0; r < count; ++r) {
    const std::string name = prefix + ".res" + std::to_string(r);
    add_conv(params, name + ".conv0", width, width, 3, rng);
    add_conv(params, name + ".conv1", width, width, 3, rng);
  }
}

ad::Var run_res_blocks(BoundParams& p, const std::string& prefix, std::size_t count, ad::Var x,
                       Activation act) {
  for (std::size_t r = 0; r < count; ++r) {
    const std::string name = prefix + ".res" + std::to_string(r);
    ad::Var y = conv_layer(p, name + ".conv0", x, kSame3, act);
    y = conv_layer(p, name + ".conv1", y, kSame3, Activation::none);
    x = activate(ad::add(x, y), act);
  }
  return x;
}

// Direct mode: flattened latent (C h w) -> (C h w / 2, 2), first half real.
ad::Var latent_to_samples(ad::Var latent) {
  const std::size_t n = latent.size();
  return ad::planes_to_complex(ad::reshape(latent, Shape{2, n / 2}));
}

ad::Var samples_to_latent(ad::Var samples, const Shape& latent) {
  return ad::reshape(ad::complex_to_planes(samples), latent);
}

}  // namespace

std::string to_string(DecoderMode mode) {
  switch (mode) {
    case DecoderMode::direct: return "direct";
    case DecoderMode::ofdm_blackbox: return "ofdm-blackbox";
    case DecoderMode::ofdm_ce_eq: return "ofdm-ce-eq";
    case DecoderMode::ofdm_ce_eq_subnets: return "ofdm-ce-eq-subnets";
    case DecoderMode::ofdm_feedback: return "ofdm-feedback";
  }
  return "unknown";
}

DecoderMode parse_decoder_mode(std::string_view name) {
  for (DecoderMode m : {DecoderMode::direct, DecoderMode::ofdm_blackbox, DecoderMode::ofdm_ce_eq,
                        DecoderMode::ofdm_ce_eq_subnets, DecoderMode::ofdm_feedback}) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown decoder mode '" + std::string(name) +
                              "' (direct, ofdm-blackbox, ofdm-ce-eq, ofdm-ce-eq-subnets, "
                              "ofdm-feedback)");
}

bool uses_channel_estimate(DecoderMode mode) {
  return mode == DecoderMode::ofdm_ce_eq || mode == DecoderMode::ofdm_ce_eq_subnets;
}

std::size_t Architecture::latent_side() const { return image_size >> downsample; }

std::size_t Architecture::latent_channels() const {
  const std::size_t area = latent_side() * latent_side();
  if (area == 0) return 0;
  if (mode == DecoderMode::direct) return 2 * ofdm.packet_length() / area;
  return 2 * ofdm.data_symbols * ofdm.fft_size / area;
}

Shape Architecture::latent_shape() const {
  return {latent_channels(), latent_side(), latent_side()};
}

std::size_t Architecture::generator_input_channels() const {
  if (mode == DecoderMode::ofdm_blackbox) return latent_channels() + 4 * ofdm.pilot_symbols;
  return latent_channels();
}

std::size_t Architecture::channel_uses() const {
  if (mode == DecoderMode::direct) return element_count(latent_shape()) / 2;
  return ofdm.packet_length();
}

void Architecture::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("architecture: " + what); };
  if (image_channels == 0 || width == 0 || subnet_width == 0 || disc_width == 0) {
    fail("channel widths must be positive");
  }
  if (downsample == 0) fail("downsample must be at least 1");
  if (image_size == 0 || image_size % (std::size_t{1} << downsample) != 0) {
    fail("image size " + std::to_string(image_size) + " is not divisible by 2^" +
         std::to_string(downsample));
  }
  if (latent_channels() == 0) fail("latent would have zero channels");
  if (mode == DecoderMode::direct) {
    if (element_count(latent_shape()) % 2 != 0) fail("direct latent size must be even");
    return;
  }
  const std::size_t area = latent_side() * latent_side();
  if (2 * ofdm.data_symbols * ofdm.fft_size % area != 0) {
    fail("2 N_s L_fft = " + std::to_string(2 * ofdm.data_symbols * ofdm.fft_size) +
         " is not a multiple of the latent area " + std::to_string(area));
  }
  if (latent_channels() % 2 != 0) fail("latent channel count must be even");
  if (ofdm.pilot_symbols == 0) fail("OFDM modes need at least one pilot symbol");
  const std::size_t side = isqrt_exact(ofdm.fft_size);
  if (side == 0) fail("fft size must be a perfect square for the subnets");
  if (mode == DecoderMode::ofdm_blackbox && side != latent_side()) {
    fail("blackbox mode needs sqrt(fft size) == latent side");
  }
}

bool is_discriminator_block(const std::string& name) { return name.starts_with("discriminator."); }

ModelParams build_model(const Architecture& arch, std::uint64_t seed, bool adversarial) {
  arch.validate();
  ModelParams params;
  Rng rng(derive_seed(seed, Stream::init));
  const std::size_t w = arch.width, c = arch.latent_channels();

  add_conv(params, "encoder.down0", w, arch.image_channels, 4, rng);
  for (std::size_t i = 1; i < arch.downsample; ++i) {
    add_conv(params, "encoder.down" + std::to_string(i), w, w, 4, rng);
  }
  add_res_blocks(params, "encoder", arch.res_blocks, w, rng);
  add_conv(params, "encoder.out", c, w, 3, rng);

  add_conv(params, "generator.in", w, arch.generator_input_channels(), 3, rng);
  add_res_blocks(params, "generator", arch.res_blocks, w, rng);
  for (std::size_t i = 0; i + 1 < arch.downsample; ++i) {
    add_conv_transpose(params, "generator.up" + std::to_string(i), w, w, 4, rng);
  }
  add_conv_transpose(params, "generator.out", w, arch.image_channels, 4, rng);

  const std::size_t ns = arch.ofdm.data_symbols, np = arch.ofdm.pilot_symbols;
  if (arch.mode == DecoderMode::ofdm_ce_eq_subnets) {
    add_subnet(params, "ce_subnet", 2 + 4 * np, 2, arch.subnet_width, rng);
  }
  if (arch.mode == DecoderMode::ofdm_ce_eq_subnets || arch.mode == DecoderMode::ofdm_feedback) {
    add_subnet(params, "eq_subnet", 4 * ns + 2, 2 * ns, arch.subnet_width, rng);
  }
  if (arch.mode == DecoderMode::ofdm_feedback) {
    add_precoder(params, "precoder", ns, arch.subnet_width, rng);
  }

  if (adversarial) {
    if (arch.image_size % 8 != 0) {
      throw std::invalid_argument("architecture: the discriminator needs an image size divisible by 8");
    }
    const std::size_t dw = arch.disc_width;
    add_conv(params, "discriminator.conv0", dw, arch.image_channels, 4, rng);
    add_conv(params, "discriminator.conv1", 2 * dw, dw, 4, rng);
    add_conv(params, "discriminator.conv2", 2 * dw, 2 * dw, 4, rng);
    add_conv(params, "discriminator.head", 1, 2 * dw, arch.image_size / 8, rng);
  }
  params.round_to_float();
  return params;
}

ad::Var encode(BoundParams& p, const Architecture& arch, ad::Var image) {
  ad::Var x = to_signed(image);
  for (std::size_t i = 0; i < arch.downsample; ++i) {
    x = conv_layer(p, "encoder.down" + std::to_string(i), x, kDown, Activation::leaky_relu);
  }
  x = run_res_blocks(p, "encoder", arch.res_blocks, x, Activation::leaky_relu);
  return conv_layer(p, "encoder.out", x, kSame3, Activation::none);
}

ad::Var generate(BoundParams& p, const Architecture& arch, ad::Var input) {
  ad::Var x = conv_layer(p, "generator.in", input, kSame3, Activation::relu);
  x = run_res_blocks(p, "generator", arch.res_blocks, x, Activation::relu);
  for (std::size_t i = 0; i + 1 < arch.downsample; ++i) {
    x = conv_transpose_layer(p, "generator.up" + std::to_string(i), x, kUp, Activation::relu);
  }
  return conv_transpose_layer(p, "generator.out", x, kUp, Activation::sigmoid);
}

ad::Var discriminate(BoundParams& p, const Architecture& /*arch*/, ad::Var image) {
  ad::Var x = to_signed(image);
  for (int i = 0; i < 3; ++i) {
    x = conv_layer(p, "discriminator.conv" + std::to_string(i), x, kDown, Activation::leaky_relu);
  }
  x = conv_layer(p, "discriminator.head", x, {1, 0}, Activation::none);
  return ad::reshape(x, Shape{});
}

Decoded decode(BoundParams& p, const Architecture& arch, ad::Var pilots_tx,
               const Demodulated& received, double noise_variance, std::optional<ad::Var> h_true) {
  const Shape latent = arch.latent_shape();
  Decoded out;
  switch (arch.mode) {
    case DecoderMode::direct:
      throw std::invalid_argument("decode: direct mode has no OFDM receiver");
    case DecoderMode::ofdm_blackbox: {
      ad::Var input = ad::concat_rows({unmap_symbols(received.data, latent),
                                       fold_planes(pilots_tx), fold_planes(received.pilots)});
      out.reconstruction = generate(p, arch, input);
      return out;
    }
    case DecoderMode::ofdm_ce_eq: {
      out.h_mmse = mmse_channel_estimate(received.pilots, pilots_tx, noise_variance);
      out.h_estimate = out.h_mmse;
      ad::Var eq = mmse_equalize(received.data, *out.h_estimate, noise_variance);
      out.reconstruction = generate(p, arch, unmap_symbols(eq, latent));
      return out;
    }
    case DecoderMode::ofdm_ce_eq_subnets: {
      out.h_mmse = mmse_channel_estimate(received.pilots, pilots_tx, noise_variance);
      out.h_estimate = refine_channel(p, "ce_subnet", *out.h_mmse, pilots_tx, received.pilots);
      ad::Var eq = mmse_equalize(received.data, *out.h_estimate, noise_variance);
      eq = refine_equalized(p, "eq_subnet", eq, *out.h_estimate, received.data);
      out.reconstruction = generate(p, arch, unmap_symbols(eq, latent));
      return out;
    }
    case DecoderMode::ofdm_feedback: {
      if (!h_true) throw std::invalid_argument("decode: feedback mode needs the true channel");
      ad::Var eq = mmse_equalize(received.data, *h_true, noise_variance);
      eq = refine_equalized(p, "eq_subnet", eq, *h_true, received.data);
      out.reconstruction = generate(p, arch, unmap_symbols(eq, latent));
      return out;
    }
  }
  throw std::logic_error("decode: unhandled mode");
}

LinkOutput run_link(BoundParams& p, const Architecture& arch, ad::Var image,
                    const ChannelRealization& channel, std::uint64_t noise_seed,
                    double clip_ratio) {
  if (image.shape() != arch.image_shape()) {
    throw std::invalid_argument("run_link: image shape " + to_string(image.shape()) +
                                " does not match " + to_string(arch.image_shape()));
  }
  ad::Tape& tape = p.tape();
  const double sigma2 = channel.noise_variance();
  LinkOutput out;
  out.h_true = tape.constant(frequency_response(channel.taps(), arch.ofdm.fft_size));

  ad::Var latent = encode(p, arch, image);

  if (arch.mode == DecoderMode::direct) {
    ad::Var tx = power_normalize(latent_to_samples(latent));
    if (std::isfinite(clip_ratio)) tx = clip(tx, clip_ratio);
    out.transmitted = tx;
    ad::Var rx = apply_channel(tx, channel, noise_seed);
    out.reconstruction = generate(p, arch, samples_to_latent(rx, arch.latent_shape()));
    return out;
  }

  ad::Var symbols = map_symbols(latent, arch.ofdm);
  symbols = arch.mode == DecoderMode::ofdm_feedback ? precode(p, "precoder", symbols, out.h_true)
                                                    : power_normalize(symbols);
  ad::Var pilots = tape.constant(pilot_symbols(arch.ofdm));
  ad::Var tx = modulate(symbols, pilots, arch.ofdm);
  if (std::isfinite(clip_ratio)) tx = clip(tx, clip_ratio);
  out.transmitted = tx;

  Demodulated rx = demodulate(apply_channel(tx, channel, noise_seed), arch.ofdm);
  Decoded d = decode(p, arch, pilots, rx, sigma2, out.h_true);
  out.reconstruction = d.reconstruction;
  out.h_mmse = d.h_mmse;
  out.h_estimate = d.h_estimate;
  return out;
}

ad::Var lsgan_discriminator_loss(ad::Var real_score, ad::Var fake_score) {
  return ad::add(ad::square(ad::add_scalar(real_score, -1.0)), ad::square(fake_score));
}

ad::Var lsgan_generator_loss(ad::Var fake_score) {
  return ad::square(ad::add_scalar(fake_score, -1.0));
}

LsganValues lsgan_losses(const ModelParams& params, const Architecture& arch,
                         std::span<const RealGrid> images,
                         std::span<const RealGrid> reconstructions) {
  if (images.size() != reconstructions.size() || images.empty()) {
    throw std::invalid_argument("lsgan_losses: need matching non-empty batches");
  }
  LsganValues v;
  for (std::size_t i = 0; i < images.size(); ++i) {
    ad::Tape tape;
    BoundParams p(tape, params, false);
    ad::Var real = discriminate(p, arch, tape.constant(images[i]));
    ad::Var fake = discriminate(p, arch, tape.constant(reconstructions[i]));
    v.discriminator += lsgan_discriminator_loss(real, fake).value().item();
    v.generator += lsgan_generator_loss(fake).value().item();
  }
  v.discriminator /= static_cast<double>(images.size());
  v.generator /= static_cast<double>(images.size());
  return v;
}

}  // namespace jscc
