#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "jscc/autodiff.hpp"
#include "jscc/nn.hpp"

namespace jscc {

/// Per-subcarrier MMSE estimate from block pilots:
/// H[k] = sum_i Yp_rx[i,k] conj(Yp[i,k]) / (N_p + sigma^2).
ad::Var mmse_channel_estimate(ad::Var pilots_rx, ad::Var pilots_tx, double noise_variance);

/// Y_eq[j,k] = Y_rx[j,k] conj(H[k]) / (|H[k]|^2 + sigma^2), one channel
/// vector applied to every data row. Throws std::domain_error when sigma^2 = 0
/// and some H[k] = 0.
ad::Var mmse_equalize(ad::Var data_rx, ad::Var channel, double noise_variance);

/// Folds complex rows (N, L, 2) into (2N, s, s) planes with s = sqrt(L):
/// real parts of every row first, then imaginary parts.
ad::Var fold_planes(ad::Var rows);
/// Inverse of fold_planes for (2N, s, s) planes.
ad::Var unfold_planes(ad::Var planes);

/// Three 5x5 conv layers (in -> width -> width -> out) with a zero-initialized
/// last layer, so a residual branch built on it starts as the identity.
void add_subnet(ModelParams& params, const std::string& prefix, std::size_t in_channels,
                std::size_t out_channels, std::size_t width, Rng& rng);
ad::Var run_subnet(BoundParams& p, const std::string& prefix, ad::Var planes);

/// H_hat = H_mmse + subnet(H_mmse, Y_p, Yp_rx).
ad::Var refine_channel(BoundParams& p, const std::string& prefix, ad::Var h_mmse,
                       ad::Var pilots_tx, ad::Var pilots_rx);
/// Y_ref = Y_eq + subnet(Y_eq, H_hat, Y_rx).
ad::Var refine_equalized(BoundParams& p, const std::string& prefix, ad::Var equalized,
                         ad::Var channel, ad::Var data_rx);

/// Mean squared pixel error.
ad::Var reconstruction_loss(ad::Var image, ad::Var reconstruction);
/// Mean over subcarriers of |H_hat - H|^2.
ad::Var channel_loss(ad::Var truth, ad::Var estimate);

struct LossTerms {
  ad::Var reconstruction;
  std::optional<ad::Var> channel;
  ad::Var total;
};

/// L_total = L_rec + lambda_c * L_cha; the channel term is omitted when no
/// estimate is supplied. Throws on shape mismatch.
LossTerms losses(ad::Var image, ad::Var reconstruction, std::optional<ad::Var> channel_truth,
                 std::optional<ad::Var> channel_estimate, double lambda_c);

struct LossBreakdown {
  double reconstruction = 0.0;
  double channel = 0.0;
  double adversarial = 0.0;
  double total = 0.0;
  double lambda_c = 0.0;
  double lambda_g = 0.0;
};

}  // namespace jscc
