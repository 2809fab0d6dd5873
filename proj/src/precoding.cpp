#include "jscc/precoding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "jscc/ofdm.hpp"
#include "jscc/receiver.hpp"

namespace jscc {

void add_precoder(ModelParams& params, const std::string& prefix, std::size_t data_symbols,
                  std::size_t width, Rng& rng) {
  add_subnet(params, prefix, 2 * data_symbols + 2, data_symbols, width, rng);
  // softplus(log(e - 1)) = 1
  const double unit = std::log(std::exp(1.0) - 1.0);
  for (double& b : params.at(prefix + ".conv2.bias").value.values()) b = unit;
}

ad::Var precoder_weights(BoundParams& p, const std::string& prefix, ad::Var symbols,
                         ad::Var channel) {
  const std::size_t rows = symbols.shape()[0];
  const std::size_t subcarriers = symbols.shape()[1];
  ad::Var input = ad::concat_rows({fold_planes(symbols), fold_planes(channel)});
  ad::Var head = run_subnet(p, prefix, input);
  return ad::reshape(ad::softplus(head), Shape{rows, subcarriers});
}

ad::Var apply_precoding(ad::Var symbols, ad::Var weights) {
  const Shape& s = symbols.shape();
  if (s.size() != 3 || weights.shape() != Shape{s[0], s[1]}) {
    throw std::invalid_argument("apply_precoding: weights " + to_string(weights.shape()) +
                                " do not match symbols " + to_string(s));
  }
  ad::Var w = ad::reshape(weights, Shape{s[0], s[1], 1});
  return power_normalize(ad::mul(symbols, w));
}

ad::Var precode(BoundParams& p, const std::string& prefix, ad::Var symbols, ad::Var channel) {
  ad::Var weights = precoder_weights(p, prefix, power_normalize(symbols), channel);
  return apply_precoding(symbols, weights);
}

double average_snr_db(std::span<const RealGrid> responses, double signal_power,
                      double noise_variance) {
  if (!(noise_variance > 0.0)) throw std::invalid_argument("average_snr_db: noise variance must be positive");
  if (responses.empty()) throw std::invalid_argument("average_snr_db: no channel responses");
  double total = 0.0;
  std::size_t count = 0;
  for (const RealGrid& h : responses) {
    for (std::size_t i = 0; i < h.size(); i += 2) total += h[i] * h[i] + h[i + 1] * h[i + 1];
    count += h.size() / 2;
  }
  return 10.0 * std::log10(signal_power * (total / static_cast<double>(count)) / noise_variance);
}

double average_snr_db(const ChannelProfile& profile, double signal_power, double noise_variance) {
  if (!(noise_variance > 0.0)) throw std::invalid_argument("average_snr_db: noise variance must be positive");
  return 10.0 * std::log10(signal_power * profile.total_power() / noise_variance);
}

double water_level(std::span<const double> gains, double noise_variance, double total_power) {
  if (gains.empty()) throw std::invalid_argument("waterfill: no subcarriers");
  if (!(total_power > 0.0)) throw std::invalid_argument("waterfill: total power must be positive");
  if (!(noise_variance > 0.0)) throw std::invalid_argument("waterfill: noise variance must be positive");
  std::vector<double> floors;
  floors.reserve(gains.size());
  for (double g : gains) {
    if (!(g > 0.0)) throw std::invalid_argument("waterfill: gains must be positive");
    floors.push_back(noise_variance / g);
  }
  std::sort(floors.begin(), floors.end());
  // Grow the active set in order of increasing floor while the level stays above the next floor.
  double prefix = 0.0;
  double level = 0.0;
  for (std::size_t n = 1; n <= floors.size(); ++n) {
    prefix += floors[n - 1];
    const double candidate = (total_power + prefix) / static_cast<double>(n);
    if (n > 1 && candidate <= floors[n - 1]) break;
    level = candidate;
  }
  return level;
}

std::vector<double> waterfill(std::span<const double> gains, double noise_variance,
                              double total_power) {
  const double level = water_level(gains, noise_variance, total_power);
  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < gains.size(); ++k) {
    if (noise_variance / gains[k] < level) active.push_back(k);
  }
  // p_k = P/n + sum_j (f_j - f_k)/n over the active set; pairwise differences
  // keep equal floors exactly uniform.
  const double n = static_cast<double>(active.size());
  std::vector<double> power(gains.size(), 0.0);
  for (std::size_t k : active) {
    const double fk = noise_variance / gains[k];
    double spread = 0.0;
    for (std::size_t j : active) spread += noise_variance / gains[j] - fk;
    power[k] = std::max(0.0, total_power / n + spread / n);
  }
  return power;
}

}  // namespace jscc
