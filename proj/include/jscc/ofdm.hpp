#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "jscc/autodiff.hpp"
#include "jscc/grid.hpp"

namespace jscc {

struct OfdmConfig {
  std::size_t fft_size = 64;
  std::size_t cp_length = 16;
  std::size_t pilot_symbols = 1;
  std::size_t data_symbols = 6;
  std::uint64_t pilot_seed = 0x5eed;

  std::size_t symbol_length() const noexcept { return fft_size + cp_length; }
  std::size_t symbol_count() const noexcept { return pilot_symbols + data_symbols; }
  std::size_t packet_length() const noexcept { return symbol_count() * symbol_length(); }

  /// Throws unless the cyclic prefix covers a `channel_paths`-tap delay spread
  /// and the extents are usable.
  void validate(std::size_t channel_paths) const;
};

/// Block pilots (N_p, L_fft, 2): a four-phase sequence {1, i, -1, -i} drawn
/// from `pilot_seed`, identical in every pilot row.
RealGrid pilot_symbols(const OfdmConfig& config);

/// Data-symbol count carried by a (C, h, w) latent; throws naming the
/// dimensions when C is odd or C*h*w/2 is not a multiple of `fft_size`.
std::size_t data_symbols_for(const Shape& latent, std::size_t fft_size);

/// (C, h, w) real latent -> (N_s, L_fft, 2): the first C/2 channels become
/// real parts, the remaining ones imaginary parts.
ad::Var map_symbols(ad::Var latent, const OfdmConfig& config);
/// Inverse of map_symbols.
ad::Var unmap_symbols(ad::Var symbols, const Shape& latent);

/// Pilots then data rows through a unitary IDFT with a cyclic prefix,
/// serialized to ((N_p + N_s)(L_fft + L_cp), 2).
ad::Var modulate(ad::Var data, ad::Var pilots, const OfdmConfig& config);

struct Demodulated {
  ad::Var pilots;  // (N_p, L_fft, 2)
  ad::Var data;    // (N_s, L_fft, 2)
};

/// Removes the cyclic prefixes and applies the unitary DFT.
Demodulated demodulate(ad::Var received, const OfdmConfig& config);

/// Scales complex values (..., 2) to unit mean power.
ad::Var power_normalize(ad::Var y);

/// Peak-to-average power ratio in dB over interleaved complex samples.
double papr_db(std::span<const double> samples);

/// Phase-preserving clip at ratio * sqrt(P_s), P_s the measured input power,
/// without the power restoration step. An infinite ratio returns `y`.
ad::Var clip_unnormalized(ad::Var y, double ratio);
/// Clip followed by rescaling back to the measured input power.
ad::Var clip(ad::Var y, double ratio);

}  // namespace jscc
