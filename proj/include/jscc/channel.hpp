#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "jscc/autodiff.hpp"
#include "jscc/grid.hpp"

namespace jscc {

/// Exponential power-delay profile: path l carries power alpha * exp(-l / decay),
/// with alpha chosen so the path powers sum to one.
class ChannelProfile {
 public:
  /// Throws std::invalid_argument unless paths >= 1 and decay > 0.
  ChannelProfile(std::size_t paths, double decay);

  std::size_t paths() const noexcept { return power_.size(); }
  double decay() const noexcept { return decay_; }
  double normalizer() const noexcept { return normalizer_; }
  std::span<const double> path_power() const noexcept { return power_; }
  double total_power() const;

 private:
  double decay_;
  double normalizer_;
  std::vector<double> power_;
};

/// One block-fading draw: taps h[0..L-1] as (L, 2) and the noise variance.
class ChannelRealization {
 public:
  ChannelRealization(RealGrid taps, double noise_variance, std::uint64_t seed);

  const RealGrid& taps() const noexcept { return taps_; }
  std::size_t paths() const noexcept { return taps_.shape()[0]; }
  double noise_variance() const noexcept { return noise_variance_; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  RealGrid taps_;
  double noise_variance_;
  std::uint64_t seed_;
};

/// Draws h_l ~ CN(0, sigma_l^2) independently per path.
ChannelRealization sample_channel(const ChannelProfile& profile, double noise_variance,
                                  std::uint64_t seed);

/// Noisy multipath channel h * y + w, truncated to the input length.
/// `y` is (N, 2) with N >= L; w ~ CN(0, sigma^2) drawn from `noise_seed`.
ad::Var apply_channel(ad::Var y, const ChannelRealization& channel, std::uint64_t noise_seed);

/// Unnormalized DFT of the zero-padded taps: H[k] = sum_l h[l] e^{-i 2 pi k l / n}.
RealGrid frequency_response(const RealGrid& taps, std::size_t fft_size);

/// Noise variance giving `snr_db` for a unit-power transmission through a
/// unit-power profile.
double noise_variance_for_snr(double snr_db);

/// 10 log10(mean |y_hat|^2 / sigma^2) over interleaved complex samples.
double receiver_snr_db(std::span<const double> received, double noise_variance);

}  // namespace jscc
