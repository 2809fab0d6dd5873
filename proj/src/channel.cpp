#include "jscc/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "jscc/rng.hpp"

namespace jscc {

ChannelProfile::ChannelProfile(std::size_t paths, double decay) : decay_(decay) {
  if (paths == 0) throw std::invalid_argument("ChannelProfile: path count must be at least 1");
  if (!(decay > 0.0)) throw std::invalid_argument("ChannelProfile: decay constant must be positive");
  power_.resize(paths);
  double total = 0.0;
  for (std::size_t l = 0; l < paths; ++l) {
    power_[l] = std::exp(-static_cast<double>(l) / decay);
    total += power_[l];
  }
  normalizer_ = 1.0 / total;
  for (double& p : power_) p *= normalizer_;
}

double ChannelProfile::total_power() const {
  double total = 0.0;
  for (double p : power_) total += p;
  return total;
}

ChannelRealization::ChannelRealization(RealGrid taps, double noise_variance, std::uint64_t seed)
    : taps_(std::move(taps)), noise_variance_(noise_variance), seed_(seed) {
  if (taps_.rank() != 2 || taps_.shape()[1] != 2 || taps_.shape()[0] == 0) {
    throw std::invalid_argument("ChannelRealization: taps must be (L, 2) with L >= 1, got " +
                                to_string(taps_.shape()));
  }
  if (!(noise_variance >= 0.0)) {
    throw std::invalid_argument("ChannelRealization: noise variance must be non-negative");
  }
}

ChannelRealization sample_channel(const ChannelProfile& profile, double noise_variance,
                                  std::uint64_t seed) {
  Rng rng(seed);
  RealGrid taps(Shape{profile.paths(), 2});
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l < profile.paths(); ++l) {
    const double sd = std::sqrt(profile.path_power()[l] / 2.0);
    taps[2 * l] = sd * normal(rng);
    taps[2 * l + 1] = sd * normal(rng);
  }
  return ChannelRealization(std::move(taps), noise_variance, seed);
}

ad::Var apply_channel(ad::Var y, const ChannelRealization& channel, std::uint64_t noise_seed) {
  if (y.shape().size() != 2 || y.shape()[1] != 2 || y.shape()[0] == 0) {
    throw std::invalid_argument("apply_channel: expected non-empty (N, 2) samples, got " +
                                to_string(y.shape()));
  }
  if (y.shape()[0] < channel.paths()) {
    throw std::invalid_argument("apply_channel: " + std::to_string(y.shape()[0]) +
                                " samples is shorter than the " +
                                std::to_string(channel.paths()) + "-path channel");
  }
  ad::Var faded = ad::causal_filter(y, channel.taps());
  if (channel.noise_variance() == 0.0) return faded;
  Rng rng(noise_seed);
  RealGrid noise = complex_gaussian(y.shape()[0], channel.noise_variance(), rng);
  return ad::add(faded, y.tape().constant(std::move(noise)));
}

RealGrid frequency_response(const RealGrid& taps, std::size_t fft_size) {
  if (taps.rank() != 2 || taps.shape()[1] != 2) {
    throw std::invalid_argument("frequency_response: taps must be (L, 2)");
  }
  const std::size_t paths = taps.shape()[0];
  if (paths > fft_size) throw std::invalid_argument("frequency_response: more taps than bins");
  RealGrid out(Shape{fft_size, 2});
  for (std::size_t k = 0; k < fft_size; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t l = 0; l < paths; ++l) {
      const std::size_t m = (k * l) % fft_size;
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(m) /
                           static_cast<double>(fft_size);
      const double c = std::cos(angle), s = std::sin(angle);
      re += taps[2 * l] * c - taps[2 * l + 1] * s;
      im += taps[2 * l] * s + taps[2 * l + 1] * c;
    }
    out[2 * k] = re;
    out[2 * k + 1] = im;
  }
  return out;
}

double noise_variance_for_snr(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

double receiver_snr_db(std::span<const double> received, double noise_variance) {
  if (!(noise_variance > 0.0)) {
    throw std::invalid_argument("receiver_snr_db: noise variance must be positive");
  }
  if (received.empty() || received.size() % 2 != 0) {
    throw std::invalid_argument("receiver_snr_db: expected interleaved complex samples");
  }
  double power = 0.0;
  for (double v : received) power += v * v;
  power /= static_cast<double>(received.size() / 2);
  return 10.0 * std::log10(power / noise_variance);
}

}  // namespace jscc
