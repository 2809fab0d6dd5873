#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "jscc/grid.hpp"

namespace jscc {

/// Images are (C, H, W) grids with values in [0, 1].
using ImageSet = std::vector<RealGrid>;

enum class DatasetKind { synthetic, png, raw_rgb };

std::string to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view name);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::synthetic;
  std::filesystem::path path;  // directory for png / raw-rgb
  std::size_t count = 1000;    // synthetic count, or cap on loaded patches (0 = all)
  std::size_t image_size = 32;
  std::uint64_t seed = 7;
};

/// Smooth random RGB fields: per image a handful of seeded 2D sinusoids,
/// partly shared between channels, offset to mid gray.
ImageSet synthetic_patches(std::uint64_t seed, std::size_t count, std::size_t size);

/// 8-bit gray, gray+alpha, RGB or RGBA PNG as a 3-channel image.
RealGrid load_png(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const RealGrid& image);

/// Every *.png in `dir`, sorted by file name. Throws when there are none.
ImageSet load_png_directory(const std::filesystem::path& dir);

/// Every *.rgb in `dir`, sorted by name; each file holds one or more
/// planar 8-bit records of 3 x size x size bytes.
ImageSet load_raw_rgb_directory(const std::filesystem::path& dir, std::size_t size);

/// Non-overlapping size x size tiles in raster order; smaller images are
/// rejected with an error naming their shape.
ImageSet tile_patches(const ImageSet& images, std::size_t size);

/// Loads per spec and returns size x size patches, at most `count` when set.
ImageSet load_dataset(const DatasetSpec& spec);

}  // namespace jscc
