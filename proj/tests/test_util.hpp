#pragma once

#include <complex>
#include <random>
#include <vector>

#include "jscc/grid.hpp"
#include "jscc/rng.hpp"

namespace testutil {

using cd = std::complex<double>;

inline jscc::RealGrid grid(jscc::Shape shape, std::vector<double> values) {
  return jscc::RealGrid(std::move(shape), std::move(values));
}

inline jscc::RealGrid randn(jscc::Shape shape, std::uint64_t seed, double scale = 1.0) {
  jscc::Rng rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  jscc::RealGrid g(std::move(shape));
  for (double& v : g.values()) v = n(rng);
  return g;
}

inline std::vector<cd> to_complex(const jscc::RealGrid& g) {
  std::vector<cd> out(g.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {g[2 * i], g[2 * i + 1]};
  return out;
}

inline jscc::RealGrid from_complex(jscc::Shape shape, const std::vector<cd>& z) {
  jscc::RealGrid g(std::move(shape));
  for (std::size_t i = 0; i < z.size(); ++i) {
    g[2 * i] = z[i].real();
    g[2 * i + 1] = z[i].imag();
  }
  return g;
}

// Brute-force n-point DFT of zero-padded taps, no normalization.
inline std::vector<cd> brute_dft(const std::vector<cd>& x, std::size_t n, double sign = -1.0) {
  const double pi = 3.14159265358979323846;
  std::vector<cd> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cd acc = 0;
    for (std::size_t l = 0; l < x.size(); ++l) {
      acc += x[l] * std::polar(1.0, sign * 2.0 * pi * static_cast<double>(k * l % n) / static_cast<double>(n));
    }
    out[k] = acc;
  }
  return out;
}

inline double max_abs_diff(const jscc::RealGrid& a, const jscc::RealGrid& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace testutil
