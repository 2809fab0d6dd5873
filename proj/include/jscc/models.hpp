#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "jscc/autodiff.hpp"
#include "jscc/channel.hpp"
#include "jscc/nn.hpp"
#include "jscc/ofdm.hpp"

namespace jscc {

/// Decoder variants, from no domain knowledge to the full receiver.
enum class DecoderMode {
  direct,              // latent samples sent straight through the multipath channel
  ofdm_blackbox,       // OFDM link, generator sees (Y_hat, Y_p, Yp_hat) directly
  ofdm_ce_eq,          // MMSE estimation and equalization before the generator
  ofdm_ce_eq_subnets,  // plus residual CE and EQ subnets
  ofdm_feedback,       // perfect CSI at both ends, precoder at the transmitter
};

std::string to_string(DecoderMode mode);
/// Accepts the hyphenated names ("ofdm-ce-eq-subnets", ...).
DecoderMode parse_decoder_mode(std::string_view name);
bool uses_channel_estimate(DecoderMode mode);

/// Desk-scale network geometry plus the OFDM layout it feeds.
struct Architecture {
  std::size_t image_channels = 3;
  std::size_t image_size = 32;
  std::size_t downsample = 2;
  std::size_t width = 16;
  std::size_t res_blocks = 2;
  std::size_t subnet_width = 8;
  std::size_t disc_width = 16;
  DecoderMode mode = DecoderMode::ofdm_ce_eq_subnets;
  OfdmConfig ofdm;

  std::size_t latent_side() const;
  /// C: for OFDM modes 2 N_s L_fft / (h w); for direct transmission the
  /// largest C whose complex sample count fits the OFDM packet length.
  std::size_t latent_channels() const;
  Shape latent_shape() const;
  Shape image_shape() const { return {image_channels, image_size, image_size}; }
  std::size_t generator_input_channels() const;
  /// Complex channel uses per transmitted image.
  std::size_t channel_uses() const;

  /// Throws std::invalid_argument describing the first inconsistency.
  void validate() const;
};

/// Creates every block the architecture's mode needs, deterministically from
/// `seed`. Discriminator blocks are added when `adversarial` is set.
ModelParams build_model(const Architecture& arch, std::uint64_t seed, bool adversarial = false);

bool is_discriminator_block(const std::string& name);

/// Image in [0, 1] -> latent (C, h, w). Pixels are mapped to [-1, 1] first.
ad::Var encode(BoundParams& p, const Architecture& arch, ad::Var image);
/// Latent-shaped input -> image in [0, 1] through a final sigmoid.
ad::Var generate(BoundParams& p, const Architecture& arch, ad::Var input);
/// Scalar score of an image in [0, 1].
ad::Var discriminate(BoundParams& p, const Architecture& arch, ad::Var image);

struct Decoded {
  ad::Var reconstruction;
  std::optional<ad::Var> h_mmse;
  /// Estimate fed to the equalizer (refined when the CE subnet is active).
  std::optional<ad::Var> h_estimate;
};

/// Receiver side of an OFDM mode. `h_true` is only read in feedback mode.
Decoded decode(BoundParams& p, const Architecture& arch, ad::Var pilots_tx,
               const Demodulated& received, double noise_variance,
               std::optional<ad::Var> h_true = std::nullopt);

struct LinkOutput {
  ad::Var reconstruction;
  ad::Var transmitted;  // time-domain samples entering the channel
  std::optional<ad::Var> h_mmse;
  std::optional<ad::Var> h_estimate;
  ad::Var h_true;  // (L_fft, 2) constant
};

constexpr double kNoClipping = std::numeric_limits<double>::infinity();

/// Full encoder -> (precoder) -> OFDM TX -> (clip) -> channel -> OFDM RX ->
/// decoder graph for one image.
LinkOutput run_link(BoundParams& p, const Architecture& arch, ad::Var image,
                    const ChannelRealization& channel, std::uint64_t noise_seed,
                    double clip_ratio = kNoClipping);

/// LSGAN terms with real images labeled 1 and reconstructions labeled 0:
/// discriminator (D(x) - 1)^2 + D(x_hat)^2, generator (D(x_hat) - 1)^2.
ad::Var lsgan_discriminator_loss(ad::Var real_score, ad::Var fake_score);
ad::Var lsgan_generator_loss(ad::Var fake_score);

struct LsganValues {
  double discriminator = 0.0;
  double generator = 0.0;
};

/// Batch-averaged LSGAN losses for images and reconstructions.
LsganValues lsgan_losses(const ModelParams& params, const Architecture& arch,
                         std::span<const RealGrid> images,
                         std::span<const RealGrid> reconstructions);

}  // namespace jscc
