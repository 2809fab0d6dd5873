#include "jscc/dataset.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "jscc/rng.hpp"

namespace jscc {

namespace fs = std::filesystem;

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::synthetic: return "synthetic";
    case DatasetKind::png: return "png";
    case DatasetKind::raw_rgb: return "raw-rgb";
  }
  return "unknown";
}

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "synthetic") return DatasetKind::synthetic;
  if (name == "png") return DatasetKind::png;
  if (name == "raw-rgb") return DatasetKind::raw_rgb;
  throw std::invalid_argument("unknown dataset kind '" + std::string(name) +
                              "' (synthetic, png, raw-rgb)");
}

ImageSet synthetic_patches(std::uint64_t seed, std::size_t count, std::size_t size) {
  if (size == 0) throw std::invalid_argument("synthetic_patches: size must be positive");
  constexpr int kWaves = 6;
  ImageSet out;
  out.reserve(count);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t n = 0; n < count; ++n) {
    Rng rng(derive_seed(seed, Stream::data, {n}));
    std::uniform_real_distribution<double> freq(-4.0, 4.0), phase(0.0, two_pi), amp(0.2, 1.0);
    std::uniform_real_distribution<double> mix(-1.0, 1.0), base(0.2, 0.8);
    RealGrid img(Shape{3, size, size});
    double mean[3];
    for (double& m : mean) m = base(rng);
    double fx[kWaves], fy[kWaves], ph[kWaves], a[kWaves], colour[kWaves][3];
    double budget = 0.0;
    for (int k = 0; k < kWaves; ++k) {
      fx[k] = freq(rng);
      fy[k] = freq(rng);
      ph[k] = phase(rng);
      a[k] = amp(rng) / (1.0 + std::hypot(fx[k], fy[k]));
      for (double& c : colour[k]) c = mix(rng);
      budget += a[k];
    }
    const double gain = 0.6 / budget;
    const double inv = 1.0 / static_cast<double>(size);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
          double v = mean[c];
          for (int k = 0; k < kWaves; ++k) {
            const double arg = two_pi * (fx[k] * x + fy[k] * y) * inv + ph[k];
            v += gain * a[k] * colour[k][c] * std::sin(arg);
          }
          img[(c * size + y) * size + x] = std::clamp(v, 0.0, 1.0);
        }
      }
    }
    out.push_back(std::move(img));
  }
  return out;
}

RealGrid load_png(const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw std::runtime_error("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw std::runtime_error("malformed PNG " + path.string() + ": " + msg);
  }
  const std::size_t h = image.height, w = image.width;
  RealGrid out(Shape{3, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        out[(c * h + y) * w + x] = buffer[(y * w + x) * 3 + c] / 255.0;
      }
    }
  }
  return out;
}

void save_png(const fs::path& path, const RealGrid& image) {
  const Shape& s = image.shape();
  if (s.size() != 3 || (s[0] != 3 && s[0] != 1)) {
    throw std::invalid_argument("save_png: expected (3 or 1, H, W), got " + to_string(s));
  }
  const std::size_t c = s[0], h = s[1], w = s[2];
  std::vector<unsigned char> buffer(h * w * c);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < c; ++k) {
        const double v = std::clamp(image[(k * h + y) * w + x], 0.0, 1.0);
        buffer[(y * w + x) * c + k] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
  }
  png_image out{};
  out.version = PNG_IMAGE_VERSION;
  out.width = static_cast<png_uint_32>(w);
  out.height = static_cast<png_uint_32>(h);
  out.format = c == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&out, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw std::runtime_error("cannot write PNG " + path.string() + ": " + out.message);
  }
}

namespace {

std::vector<fs::path> files_with_extension(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no " + ext + " files in " + dir.string());
  return files;
}

}  // namespace

ImageSet load_png_directory(const fs::path& dir) {
  ImageSet out;
  for (const auto& f : files_with_extension(dir, ".png")) out.push_back(load_png(f));
  return out;
}

ImageSet load_raw_rgb_directory(const fs::path& dir, std::size_t size) {
  const std::size_t record = 3 * size * size;
  ImageSet out;
  for (const auto& f : files_with_extension(dir, ".rgb")) {
    std::ifstream in(f, std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
    if (!in.eof() && in.fail()) throw std::runtime_error("cannot read " + f.string());
    if (bytes.empty() || bytes.size() % record != 0) {
      throw std::runtime_error("malformed raw-rgb file " + f.string() + ": " +
                               std::to_string(bytes.size()) + " bytes is not a multiple of " +
                               std::to_string(record));
    }
    for (std::size_t off = 0; off < bytes.size(); off += record) {
      RealGrid img(Shape{3, size, size});
      for (std::size_t i = 0; i < record; ++i) img[i] = bytes[off + i] / 255.0;
      out.push_back(std::move(img));
    }
  }
  return out;
}

ImageSet tile_patches(const ImageSet& images, std::size_t size) {
  ImageSet out;
  for (const RealGrid& img : images) {
    const Shape& s = img.shape();
    if (s.size() != 3 || s[1] < size || s[2] < size) {
      throw std::invalid_argument("tile_patches: image " + to_string(s) + " smaller than " +
                                  std::to_string(size) + "x" + std::to_string(size));
    }
    const std::size_t c = s[0], h = s[1], w = s[2];
    for (std::size_t ty = 0; ty + size <= h; ty += size) {
      for (std::size_t tx = 0; tx + size <= w; tx += size) {
        RealGrid patch(Shape{c, size, size});
        for (std::size_t k = 0; k < c; ++k) {
          for (std::size_t y = 0; y < size; ++y) {
            for (std::size_t x = 0; x < size; ++x) {
              patch[(k * size + y) * size + x] = img[(k * h + ty + y) * w + tx + x];
            }
          }
        }
        out.push_back(std::move(patch));
      }
    }
  }
  return out;
}

ImageSet load_dataset(const DatasetSpec& spec) {
  ImageSet images;
  switch (spec.kind) {
    case DatasetKind::synthetic:
      return synthetic_patches(spec.seed, spec.count, spec.image_size);
    case DatasetKind::png:
      images = tile_patches(load_png_directory(spec.path), spec.image_size);
      break;
    case DatasetKind::raw_rgb:
      images = load_raw_rgb_directory(spec.path, spec.image_size);
      break;
  }
  if (spec.count != 0 && images.size() > spec.count) images.resize(spec.count);
  return images;
}

}  // namespace jscc
