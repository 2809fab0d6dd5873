#include "jscc/receiver.hpp"

#include <cmath>
#include <stdexcept>

namespace jscc {

namespace {

std::size_t grid_side(std::size_t subcarriers) {
  const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(subcarriers))));
  if (side * side != subcarriers) {
    throw std::invalid_argument("fold_planes: subcarrier count " + std::to_string(subcarriers) +
                                " is not a perfect square");
  }
  return side;
}

ad::Var as_rows(ad::Var v) {
  // (L, 2) -> (1, L, 2); (N, L, 2) unchanged.
  if (v.shape().size() == 2) return ad::reshape(v, Shape{1, v.shape()[0], 2});
  return v;
}

}  // namespace

ad::Var mmse_channel_estimate(ad::Var pilots_rx, ad::Var pilots_tx, double noise_variance) {
  if (pilots_rx.shape() != pilots_tx.shape() || pilots_rx.shape().size() != 3) {
    throw std::invalid_argument("mmse_channel_estimate: pilot shapes " +
                                to_string(pilots_rx.shape()) + " and " +
                                to_string(pilots_tx.shape()) + " must match as (N_p, L, 2)");
  }
  if (!(noise_variance >= 0.0)) {
    throw std::invalid_argument("mmse_channel_estimate: noise variance must be non-negative");
  }
  const double pilots = static_cast<double>(pilots_rx.shape()[0]);
  ad::Var correlation = ad::sum_rows(ad::complex_conj_mul(pilots_rx, pilots_tx));
  return ad::scale(correlation, 1.0 / (pilots + noise_variance));
}

ad::Var mmse_equalize(ad::Var data_rx, ad::Var channel, double noise_variance) {
  const Shape& ds = data_rx.shape();
  const Shape& hs = channel.shape();
  if (ds.size() != 3 || hs.size() != 2 || ds[1] != hs[0] || ds[2] != 2 || hs[1] != 2) {
    throw std::invalid_argument("mmse_equalize: data " + to_string(ds) + " and channel " +
                                to_string(hs) + " must be (N_s, L, 2) and (L, 2)");
  }
  const std::size_t subcarriers = hs[0];
  ad::Var numerator = ad::complex_conj_mul(data_rx, channel);
  ad::Var denominator = ad::add_scalar(ad::complex_abs2(channel), noise_variance);
  try {
    return ad::div(numerator, ad::reshape(denominator, Shape{subcarriers, 1}));
  } catch (const std::domain_error&) {
    throw std::domain_error("mmse_equalize: zero channel gain with zero noise variance");
  }
}

ad::Var fold_planes(ad::Var rows) {
  ad::Var r = as_rows(rows);
  const Shape& s = r.shape();
  if (s.size() != 3 || s[2] != 2) {
    throw std::invalid_argument("fold_planes: expected (N, L, 2), got " + to_string(s));
  }
  const std::size_t n = s[0], side = grid_side(s[1]);
  return ad::reshape(ad::complex_to_planes(r), Shape{2 * n, side, side});
}

ad::Var unfold_planes(ad::Var planes) {
  const Shape& s = planes.shape();
  if (s.size() != 3 || s[0] % 2 != 0) {
    throw std::invalid_argument("unfold_planes: expected (2N, s, s), got " + to_string(s));
  }
  const std::size_t n = s[0] / 2, subcarriers = s[1] * s[2];
  ad::Var flat = ad::reshape(planes, Shape{2, n * subcarriers});
  return ad::reshape(ad::planes_to_complex(flat), Shape{n, subcarriers, 2});
}

void add_subnet(ModelParams& params, const std::string& prefix, std::size_t in_channels,
                std::size_t out_channels, std::size_t width, Rng& rng) {
  add_conv(params, prefix + ".conv0", width, in_channels, 5, rng);
  add_conv(params, prefix + ".conv1", width, width, 5, rng);
  add_conv(params, prefix + ".conv2", out_channels, width, 5, rng, /*zero=*/true);
}

ad::Var run_subnet(BoundParams& p, const std::string& prefix, ad::Var planes) {
  const ad::ConvOptions same{1, 2};
  ad::Var x = conv_layer(p, prefix + ".conv0", planes, same, Activation::leaky_relu);
  x = conv_layer(p, prefix + ".conv1", x, same, Activation::leaky_relu);
  return conv_layer(p, prefix + ".conv2", x, same, Activation::none);
}

ad::Var refine_channel(BoundParams& p, const std::string& prefix, ad::Var h_mmse,
                       ad::Var pilots_tx, ad::Var pilots_rx) {
  ad::Var input =
      ad::concat_rows({fold_planes(h_mmse), fold_planes(pilots_tx), fold_planes(pilots_rx)});
  ad::Var residual = unfold_planes(run_subnet(p, prefix, input));
  return ad::add(h_mmse, ad::reshape(residual, h_mmse.shape()));
}

ad::Var refine_equalized(BoundParams& p, const std::string& prefix, ad::Var equalized,
                         ad::Var channel, ad::Var data_rx) {
  ad::Var input =
      ad::concat_rows({fold_planes(equalized), fold_planes(channel), fold_planes(data_rx)});
  ad::Var residual = unfold_planes(run_subnet(p, prefix, input));
  return ad::add(equalized, residual);
}

ad::Var reconstruction_loss(ad::Var image, ad::Var reconstruction) {
  if (image.shape() != reconstruction.shape()) {
    throw std::invalid_argument("reconstruction_loss: shape mismatch " + to_string(image.shape()) +
                                " vs " + to_string(reconstruction.shape()));
  }
  return ad::mean(ad::square(ad::sub(reconstruction, image)));
}

ad::Var channel_loss(ad::Var truth, ad::Var estimate) {
  if (truth.shape() != estimate.shape()) {
    throw std::invalid_argument("channel_loss: shape mismatch " + to_string(truth.shape()) +
                                " vs " + to_string(estimate.shape()));
  }
  return ad::mean(ad::complex_abs2(ad::sub(estimate, truth)));
}

LossTerms losses(ad::Var image, ad::Var reconstruction, std::optional<ad::Var> channel_truth,
                 std::optional<ad::Var> channel_estimate, double lambda_c) {
  LossTerms terms{reconstruction_loss(image, reconstruction), std::nullopt, {}};
  terms.total = terms.reconstruction;
  if (channel_truth && channel_estimate) {
    terms.channel = channel_loss(*channel_truth, *channel_estimate);
    terms.total = ad::add(terms.total, ad::scale(*terms.channel, lambda_c));
  }
  return terms;
}

}  // namespace jscc
