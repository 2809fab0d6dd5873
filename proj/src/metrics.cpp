#include "jscc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace jscc {

namespace {

void require_same_shape(const RealGrid& a, const RealGrid& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + to_string(a.shape()) +
                                " vs " + to_string(b.shape()));
  }
}

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> w(size);
  const double centre = (static_cast<double>(size) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - centre;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

// Separable valid-region filter of an H x W plane.
std::vector<double> filter_valid(const double* plane, std::size_t h, std::size_t w,
                                 const std::vector<double>& win) {
  const std::size_t k = win.size(), oh = h - k + 1, ow = w - k + 1;
  std::vector<double> rows(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += win[i] * plane[y * w + x + i];
      rows[y * ow + x] = acc;
    }
  }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += win[i] * rows[(y + i) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double mse(const RealGrid& a, const RealGrid& b) {
  require_same_shape(a, b, "mse");
  if (a.size() == 0) throw std::invalid_argument("mse: empty grids");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double psnr_from_mse(double m) {
  if (m <= 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / m));
}

double psnr_db(const RealGrid& reference, const RealGrid& test) {
  return psnr_from_mse(mse(reference, test));
}

double ssim(const RealGrid& reference, const RealGrid& test) {
  require_same_shape(reference, test, "ssim");
  const Shape& s = reference.shape();
  if (s.size() != 3) throw std::invalid_argument("ssim: expected (C, H, W), got " + to_string(s));
  const std::size_t c = s[0], h = s[1], w = s[2];
  std::size_t size = 11;
  double sigma = 1.5;
  if (std::min(h, w) < 16) {
    size = std::max<std::size_t>(1, std::min(h, w) / 2) | 1;  // odd
    sigma = 1.5 * static_cast<double>(size) / 11.0;
  }
  const auto win = gaussian_window(size, sigma);
  constexpr double c1 = (0.01 * 1.0) * (0.01 * 1.0);
  constexpr double c2 = (0.03 * 1.0) * (0.03 * 1.0);

  std::vector<double> xx(h * w), yy(h * w), xy(h * w);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* x = reference.data() + ch * h * w;
    const double* y = test.data() + ch * h * w;
    for (std::size_t i = 0; i < h * w; ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, win);
    const auto my = filter_valid(y, h, w, win);
    const auto sxx = filter_valid(xx.data(), h, w, win);
    const auto syy = filter_valid(yy.data(), h, w, win);
    const auto sxy = filter_valid(xy.data(), h, w, win);
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      total += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace jscc
