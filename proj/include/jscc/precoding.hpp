#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "jscc/autodiff.hpp"
#include "jscc/channel.hpp"
#include "jscc/nn.hpp"

namespace jscc {

/// Precoder network: same three-layer conv shape as the receiver subnets,
/// fed with folded (Y, H) planes and producing one plane per data symbol.
/// The head is initialized so that softplus(head) == 1 everywhere.
void add_precoder(ModelParams& params, const std::string& prefix, std::size_t data_symbols,
                  std::size_t width, Rng& rng);

/// Non-negative weights W (N_s, L) from unit-power symbols (N_s, L, 2) and
/// the channel response (L, 2).
ad::Var precoder_weights(BoundParams& p, const std::string& prefix, ad::Var symbols,
                         ad::Var channel);

/// Y' = power_normalize(W (.) Y). With W identically one this equals
/// power_normalize(Y) bit for bit.
ad::Var apply_precoding(ad::Var symbols, ad::Var weights);

/// Network weights followed by apply_precoding. `symbols` is the raw mapped
/// encoder output before power normalization.
ad::Var precode(BoundParams& p, const std::string& prefix, ad::Var symbols, ad::Var channel);

/// Frequency-domain average SNR, Monte-Carlo over channel responses (L, 2):
/// 10 log10(P * mean_k |H[k]|^2 / sigma^2).
double average_snr_db(std::span<const RealGrid> responses, double signal_power,
                      double noise_variance);
/// Closed form 10 log10(P * sum_l sigma_l^2 / sigma^2).
double average_snr_db(const ChannelProfile& profile, double signal_power, double noise_variance);

/// Water-filling powers p_k = max(0, mu - sigma^2 / g_k) with sum p_k = P.
/// Throws unless every gain and the total power are positive.
std::vector<double> waterfill(std::span<const double> gains, double noise_variance,
                              double total_power);

/// Water level mu matching waterfill().
double water_level(std::span<const double> gains, double noise_variance, double total_power);

}  // namespace jscc
