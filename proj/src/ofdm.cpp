#include "jscc/ofdm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "jscc/rng.hpp"

namespace jscc {

void OfdmConfig::validate(std::size_t channel_paths) const {
  if (fft_size == 0) throw std::invalid_argument("OfdmConfig: fft_size must be positive");
  if (pilot_symbols == 0) throw std::invalid_argument("OfdmConfig: at least one pilot symbol required");
  if (data_symbols == 0) throw std::invalid_argument("OfdmConfig: at least one data symbol required");
  if (cp_length > fft_size) throw std::invalid_argument("OfdmConfig: cyclic prefix longer than symbol");
  if (channel_paths > cp_length + 1) {
    throw std::invalid_argument("OfdmConfig: cyclic prefix of " + std::to_string(cp_length) +
                                " samples cannot absorb a " + std::to_string(channel_paths) +
                                "-path channel");
  }
}

RealGrid pilot_symbols(const OfdmConfig& config) {
  Rng rng(config.pilot_seed);
  std::uniform_int_distribution<int> phase(0, 3);
  const std::size_t n = config.fft_size;
  RealGrid row(Shape{n, 2});
  static constexpr double kRe[4] = {1.0, 0.0, -1.0, 0.0};
  static constexpr double kIm[4] = {0.0, 1.0, 0.0, -1.0};
  for (std::size_t k = 0; k < n; ++k) {
    const int q = phase(rng);
    row[2 * k] = kRe[q];
    row[2 * k + 1] = kIm[q];
  }
  RealGrid out(Shape{config.pilot_symbols, n, 2});
  for (std::size_t r = 0; r < config.pilot_symbols; ++r) {
    for (std::size_t i = 0; i < 2 * n; ++i) out[r * 2 * n + i] = row[i];
  }
  return out;
}

std::size_t data_symbols_for(const Shape& latent, std::size_t fft_size) {
  if (latent.size() != 3) {
    throw std::invalid_argument("map_symbols: latent must be (C, h, w), got " + to_string(latent));
  }
  const std::size_t c = latent[0], h = latent[1], w = latent[2];
  const std::size_t reals = c * h * w;
  const std::string dims = "C=" + std::to_string(c) + ", h=" + std::to_string(h) +
                           ", w=" + std::to_string(w) + ", L_fft=" + std::to_string(fft_size);
  if (c % 2 != 0) {
    throw std::invalid_argument("map_symbols: channel count must be even to split real/imag (" +
                                dims + ")");
  }
  if ((reals / 2) % fft_size != 0) {
    throw std::invalid_argument("map_symbols: C*h*w/2 = " + std::to_string(reals / 2) +
                                " is not a multiple of the subcarrier count (" + dims + ")");
  }
  return reals / 2 / fft_size;
}

ad::Var map_symbols(ad::Var latent, const OfdmConfig& config) {
  const std::size_t symbols = data_symbols_for(latent.shape(), config.fft_size);
  if (symbols != config.data_symbols) {
    throw std::invalid_argument("map_symbols: latent " + to_string(latent.shape()) + " carries " +
                                std::to_string(symbols) + " data symbols, config expects " +
                                std::to_string(config.data_symbols));
  }
  ad::Var planes = ad::reshape(latent, Shape{2, latent.size() / 2});
  return ad::reshape(ad::planes_to_complex(planes), Shape{symbols, config.fft_size, 2});
}

ad::Var unmap_symbols(ad::Var symbols, const Shape& latent) {
  if (element_count(latent) != symbols.size()) {
    throw std::invalid_argument("unmap_symbols: " + to_string(symbols.shape()) +
                                " does not fill latent " + to_string(latent));
  }
  ad::Var flat = ad::reshape(symbols, Shape{symbols.size() / 2, 2});
  return ad::reshape(ad::complex_to_planes(flat), latent);
}

ad::Var modulate(ad::Var data, ad::Var pilots, const OfdmConfig& config) {
  const Shape expected_data{config.data_symbols, config.fft_size, 2};
  const Shape expected_pilots{config.pilot_symbols, config.fft_size, 2};
  if (data.shape() != expected_data) {
    throw std::invalid_argument("modulate: data must be " + to_string(expected_data) + ", got " +
                                to_string(data.shape()));
  }
  if (pilots.shape() != expected_pilots) {
    throw std::invalid_argument("modulate: pilots must be " + to_string(expected_pilots) +
                                ", got " + to_string(pilots.shape()));
  }
  ad::Var frame = ad::concat_rows({pilots, data});
  ad::Var time = ad::add_cyclic_prefix(ad::idft(frame), config.cp_length);
  return ad::reshape(time, Shape{config.packet_length(), 2});
}

Demodulated demodulate(ad::Var received, const OfdmConfig& config) {
  const Shape expected{config.packet_length(), 2};
  if (received.shape() != expected) {
    throw std::invalid_argument("demodulate: expected " + to_string(expected) +
                                " received samples, got " + to_string(received.shape()));
  }
  ad::Var symbols = ad::reshape(received, Shape{config.symbol_count(), config.symbol_length(), 2});
  ad::Var freq = ad::dft(ad::remove_cyclic_prefix(symbols, config.cp_length));
  return {ad::slice_rows(freq, 0, config.pilot_symbols),
          ad::slice_rows(freq, config.pilot_symbols, config.symbol_count())};
}

ad::Var power_normalize(ad::Var y) {
  double energy = 0.0;
  for (double v : y.value().values()) energy += v * v;
  if (energy == 0.0) throw std::domain_error("power_normalize: all-zero input");
  ad::Var power = ad::mean(ad::complex_abs2(y));
  return ad::div(y, ad::sqrt(power));
}

double papr_db(std::span<const double> samples) {
  if (samples.empty() || samples.size() % 2 != 0) {
    throw std::invalid_argument("papr_db: expected non-empty interleaved complex samples");
  }
  double peak = 0.0, total = 0.0;
  for (std::size_t i = 0; i < samples.size(); i += 2) {
    const double p = samples[i] * samples[i] + samples[i + 1] * samples[i + 1];
    peak = std::max(peak, p);
    total += p;
  }
  const double mean = total / static_cast<double>(samples.size() / 2);
  return 10.0 * std::log10(peak / mean);
}

ad::Var clip_unnormalized(ad::Var y, double ratio) {
  if (!(ratio > 0.0)) throw std::invalid_argument("clip: clipping ratio must be positive");
  if (std::isinf(ratio)) return y;
  ad::Var power = ad::mean(ad::complex_abs2(y));
  if (!(power.value()[0] > 0.0)) throw std::domain_error("clip: input power must be positive");
  return ad::clip_amplitude(y, ad::scale(ad::sqrt(power), ratio));
}

ad::Var clip(ad::Var y, double ratio) {
  if (!(ratio > 0.0)) throw std::invalid_argument("clip: clipping ratio must be positive");
  if (std::isinf(ratio)) return y;
  ad::Var power = ad::mean(ad::complex_abs2(y));
  ad::Var clipped = clip_unnormalized(y, ratio);
  ad::Var clipped_power = ad::mean(ad::complex_abs2(clipped));
  return ad::mul(clipped, ad::sqrt(ad::div(power, clipped_power)));
}

}  // namespace jscc
