#pragma once

#include "jscc/grid.hpp"

namespace jscc {

inline constexpr double kPsnrCapDb = 100.0;

/// Mean squared error between equally shaped grids.
double mse(const RealGrid& a, const RealGrid& b);

/// 10 log10(1 / MSE) for pixels in [0, 1], capped at kPsnrCapDb.
double psnr_db(const RealGrid& reference, const RealGrid& test);
double psnr_from_mse(double mse);

/// Mean SSIM over channels of (C, H, W) images with dynamic range 1, using
/// an 11-tap Gaussian window (sigma 1.5) over the valid region. Images under
/// 16 px on a side use a window of about half their size.
double ssim(const RealGrid& reference, const RealGrid& test);

}  // namespace jscc
