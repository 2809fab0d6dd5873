#include <doctest.h>
#include <png.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "jscc/config.hpp"
#include "jscc/dataset.hpp"
#include "jscc/experiments.hpp"
#include "jscc/metrics.hpp"
#include "test_util.hpp"

#ifndef JSCC_GOLDEN_DIR
#error "JSCC_GOLDEN_DIR must point at tests/golden"
#endif

using namespace jscc;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path golden(const std::string& name) { return fs::path(JSCC_GOLDEN_DIR) / name; }

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("jscc_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Written with libpng directly so the fixture does not depend on save_png.
void write_gray_png(const fs::path& path, std::size_t side, const std::vector<unsigned char>& pixels) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(side);
  img.height = static_cast<png_uint_32>(side);
  img.format = PNG_FORMAT_GRAY;
  REQUIRE(png_image_write_to_file(&img, path.c_str(), 0, pixels.data(), 0, nullptr) != 0);
}

}  // namespace

TEST_CASE("config defaults") {
  ExperimentConfig c;
  CHECK(c.ofdm.fft_size == 64);
  CHECK(c.ofdm.cp_length == 16);
  CHECK(c.channel_paths == 8);
  CHECK(c.channel_decay == 4.0);
  CHECK(c.eval_repeats == 5);
  CHECK_NOTHROW(c.validate());
  CHECK(c.architecture().latent_channels() == 12);
}

TEST_CASE("config text echoes back byte-identical") {
  const std::string text = read_file(golden("small.ini"));
  const ExperimentConfig c = parse_config(text);
  CHECK(serialize(c) == text);
  CHECK(c.ofdm.fft_size == 16);
  CHECK(c.width == 6);
  CHECK(std::isinf(c.clip_ratio));
  CHECK(serialize(parse_config(serialize(ExperimentConfig{}))) == serialize(ExperimentConfig{}));

  ExperimentConfig d;
  d.clip_ratio = 1.2;
  d.learning_rate = 1e-3;
  d.lambda_g = 5e-5;
  d.mode = DecoderMode::ofdm_feedback;
  const ExperimentConfig back = parse_config(serialize(d));
  CHECK(back.clip_ratio == 1.2);
  CHECK(back.lambda_g == 5e-5);
  CHECK(back.mode == DecoderMode::ofdm_feedback);
  CHECK(serialize(back) == serialize(d));
}

TEST_CASE("config errors name the problem") {
  auto message = [](const std::string& text) -> std::string {
    try {
      parse_config(text);
    } catch (const std::invalid_argument& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message("[ofdm]\nfft_sise = 64\n").find("fft_sise") != std::string::npos);
  CHECK(message("[ofdm]\nfft_size = sixty\n").find("line 2") != std::string::npos);
  CHECK(message("[nope]\n").find("nope") != std::string::npos);
  CHECK(message("fft_size = 64\n") != "");
  CHECK(message("[model]\nmode = ofdm-magic\n").find("ofdm-magic") != std::string::npos);

  ExperimentConfig c;
  c.channel_paths = 18;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("cp_length"), std::invalid_argument);
  ExperimentConfig d;
  d.data.kind = DatasetKind::png;
  d.data.path = "/definitely/not/here";
  CHECK_THROWS_WITH_AS(d.validate(), doctest::Contains("/definitely/not/here"), std::invalid_argument);
  ExperimentConfig e;
  e.latent_channels = 10;
  CHECK_THROWS_WITH_AS(e.validate(), doctest::Contains("channels"), std::invalid_argument);
  CHECK_THROWS(load_config("/definitely/not/here.ini"));
}

TEST_CASE("output directory can be overridden from the environment") {
  ExperimentConfig c;
  ::setenv("JSCC_OUTPUT_DIR", "/tmp/elsewhere", 1);
  apply_environment(c);
  CHECK(c.output_dir == fs::path("/tmp/elsewhere"));
  ::unsetenv("JSCC_OUTPUT_DIR");
  ExperimentConfig d;
  apply_environment(d);
  CHECK(d.output_dir == fs::path("out"));
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.0, 0.1, 1.0 / 3.0, 5e-4, 1e300, -2.5}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(kNoClipping) == "inf");
}

TEST_CASE("synthetic patches are deterministic smooth fields in [0, 1]") {
  const ImageSet a = synthetic_patches(7, 10, 32), b = synthetic_patches(7, 10, 32);
  REQUIRE(a.size() == 10);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  CHECK_FALSE(a[0] == synthetic_patches(8, 1, 32)[0]);
  CHECK_FALSE(a[0] == a[1]);
  for (const auto& img : a) {
    CHECK(img.shape() == Shape{3, 32, 32});
    double tv = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t y = 0; y < 32; ++y) {
        for (std::size_t x = 0; x + 1 < 32; ++x) {
          tv += std::abs(img[(c * 32 + y) * 32 + x + 1] - img[(c * 32 + y) * 32 + x]);
        }
      }
    }
    for (double v : img.values()) CHECK((v >= 0.0 && v <= 1.0));
    CHECK(tv / (3 * 32 * 31) < 0.2);
  }
}

TEST_CASE("PNG gray ramp fixture") {
  const fs::path dir = scratch_dir("png");
  std::vector<unsigned char> ramp(32 * 32);
  for (std::size_t y = 0; y < 32; ++y) {
    for (std::size_t x = 0; x < 32; ++x) ramp[y * 32 + x] = static_cast<unsigned char>((x + y) * 255 / 62);
  }
  write_gray_png(dir / "ramp.png", 32, ramp);
  const RealGrid img = load_png(dir / "ramp.png");
  CHECK(img.shape() == Shape{3, 32, 32});
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(img[c * 1024] == 0.0);
    CHECK(img[c * 1024 + 31 * 32 + 31] == 1.0);
  }

  // save_png then load_png is lossless at 8 bits.
  RealGrid q = synthetic_patches(1, 1, 16)[0];
  for (double& v : q.values()) v = std::round(v * 255.0) / 255.0;
  save_png(dir / "q.png", q);
  CHECK(testutil::max_abs_diff(load_png(dir / "q.png"), q) < 1e-12);

  write_gray_png(dir / "ramp2.png", 32, ramp);
  const ImageSet all = load_png_directory(dir);
  CHECK(all.size() == 3);

  DatasetSpec spec;
  spec.kind = DatasetKind::png;
  spec.path = dir;
  spec.image_size = 16;
  spec.count = 0;
  // Two 32x32 images tile into four 16x16 patches each, plus one 16x16.
  CHECK(load_dataset(spec).size() == 9);
  fs::remove_all(dir);
}

TEST_CASE("dataset errors") {
  const fs::path empty = scratch_dir("empty");
  CHECK_THROWS(load_png_directory(empty));
  std::ofstream(empty / "broken.png") << "not a png";
  CHECK_THROWS_WITH(load_png_directory(empty), doctest::Contains("broken.png"));
  std::ofstream(empty / "short.rgb") << "abc";
  CHECK_THROWS_WITH(load_raw_rgb_directory(empty, 16), doctest::Contains("short.rgb"));
  CHECK_THROWS(load_png("/definitely/not/here.png"));
  CHECK(parse_dataset_kind("raw-rgb") == DatasetKind::raw_rgb);
  CHECK_THROWS(parse_dataset_kind("jpeg"));
  fs::remove_all(empty);
}

TEST_CASE("raw RGB records are planar") {
  const fs::path dir = scratch_dir("raw");
  std::string bytes(3 * 4 * 4 * 2, '\0');
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<char>(i);
  std::ofstream(dir / "a.rgb", std::ios::binary) << bytes;
  const ImageSet imgs = load_raw_rgb_directory(dir, 4);
  REQUIRE(imgs.size() == 2);
  CHECK(imgs[0][0] == 0.0);
  CHECK(imgs[0][16] == doctest::Approx(16.0 / 255.0));
  CHECK(imgs[1][0] == doctest::Approx(48.0 / 255.0));
  fs::remove_all(dir);
}

TEST_CASE("PSNR and SSIM examples") {
  const RealGrid x = synthetic_patches(3, 1, 32)[0];
  CHECK(psnr_db(x, x) == kPsnrCapDb);
  CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(psnr_from_mse(0.01) == doctest::Approx(20.0).epsilon(1e-12));

  RealGrid off = x;
  for (double& v : off.values()) v = v > 0.5 ? v - 0.1 : v + 0.1;
  CHECK(mse(x, off) == doctest::Approx(0.01));
  CHECK(psnr_db(x, off) == doctest::Approx(20.0));

  // Binary checkerboard-of-blocks against its complement.
  RealGrid b({3, 32, 32});
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < 32; ++y) {
      for (std::size_t i = 0; i < 32; ++i) b[(c * 32 + y) * 32 + i] = ((y / 4 + i / 4 + c) % 2) ? 1.0 : 0.0;
    }
  }
  RealGrid inv = b;
  for (double& v : inv.values()) v = 1.0 - v;
  CHECK(ssim(b, inv) < 0.2);

  // Small images use a shrunken window but still give 1 for identical input.
  const RealGrid s = synthetic_patches(3, 1, 8)[0];
  CHECK(ssim(s, s) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS(ssim(x, s));
  CHECK_THROWS(mse(x, s));
}

TEST_CASE("SSIM matches a direct windowed evaluation") {
  const std::size_t n = 16, valid = n - 10;
  const RealGrid a = synthetic_patches(4, 1, n)[0], b = synthetic_patches(5, 1, n)[0];
  std::vector<double> w(11);
  double ws = 0.0;
  for (int i = 0; i < 11; ++i) ws += (w[i] = std::exp(-(i - 5.0) * (i - 5.0) / (2 * 1.5 * 1.5)));
  for (double& v : w) v /= ws;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t oy = 0; oy < valid; ++oy) {
      for (std::size_t ox = 0; ox < valid; ++ox) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (std::size_t y = 0; y < 11; ++y) {
          for (std::size_t x = 0; x < 11; ++x) {
            const std::size_t at = (c * n + oy + y) * n + ox + x;
            const double k = w[y] * w[x], va = a[at], vb = b[at];
            ma += k * va;
            mb += k * vb;
            saa += k * va * va;
            sbb += k * vb * vb;
            sab += k * va * vb;
          }
        }
        saa -= ma * ma;
        sbb -= mb * mb;
        sab -= ma * mb;
        total += (2 * ma * mb + c1) * (2 * sab + c2) / ((ma * ma + mb * mb + c1) * (saa + sbb + c2));
      }
    }
  }
  CHECK(ssim(a, b) == doctest::Approx(total / (3 * valid * valid)).epsilon(1e-9));
}

TEST_CASE("metrics CSV header is stable and rows re-parse") {
  const std::string header = read_file(golden("metrics_header.csv"));
  std::ostringstream out;
  {
    CsvWriter w(out);
    MetricsRow r;
    r.experiment = "sweep-snr";
    r.snr_db = 5;
    r.n_s = 6;
    r.n_p = 1;
    r.psnr_db = 23.5;
    r.ssim = 0.81;
    r.ce_mse = std::nan("");
    r.ce_mse_mmse = 0.031;
    r.papr_db = 9.7;
    r.cpp = 0.182;
    w.write(r);
    r.clip_ratio = 1.2;
    w.write(r);
  }
  const std::string text = out.str();
  CHECK(text.substr(0, header.size()) == header);
  std::istringstream in(text);
  const auto rows = parse_metrics_csv(in);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].experiment == "sweep-snr");
  CHECK(std::isinf(rows[0].clip_ratio));
  CHECK(rows[1].clip_ratio == 1.2);
  CHECK(std::isnan(rows[0].ce_mse));
  CHECK(rows[0].ce_mse_mmse == 0.031);
  CHECK(rows[0].cpp == 0.182);
  CHECK(format_row(rows[1]) == format_row(parse_metrics_csv(in = std::istringstream(text))[1]));

  std::istringstream bad("experiment,snr\nx,1\n");
  CHECK_THROWS(parse_metrics_csv(bad));
  CHECK(std::string(kTrainLogHeader) + "\n" == read_file(golden("train_log_header.csv")));
}

TEST_CASE("channel uses per pixel") {
  OfdmConfig seven;
  seven.data_symbols = 7;
  CHECK(channel_uses_per_pixel(seven, 32, 32) == doctest::Approx(8.0 * 80.0 / 3072.0));
  CHECK(std::round(channel_uses_per_pixel(seven, 32, 32) * 1000) / 1000 == 0.208);
  OfdmConfig six;
  CHECK(std::round(channel_uses_per_pixel(six, 32, 32) * 1000) / 1000 == 0.182);

  // C = 14 latent channels fill exactly seven data symbols.
  Architecture a;
  a.ofdm.data_symbols = 7;
  CHECK(a.latent_channels() == 14);
  CHECK(channel_uses_per_pixel(a) == doctest::Approx(0.2083).epsilon(1e-3));
  a.mode = DecoderMode::direct;
  CHECK(channel_uses_per_pixel(a) <= channel_uses_per_pixel(seven, 32, 32));
}

TEST_CASE("pilot splits keep the budget") {
  const auto s = pilot_splits(7);
  REQUIRE(s.size() == 3);
  CHECK(s[0] == std::pair<std::size_t, std::size_t>{1, 6});
  CHECK(s[1] == std::pair<std::size_t, std::size_t>{2, 5});
  CHECK(s[2] == std::pair<std::size_t, std::size_t>{3, 4});
  CHECK(pilot_splits(3, 5).size() == 2);
}

TEST_CASE("synthetic validation data is disjoint from training data") {
  ExperimentConfig c = parse_config(read_file(golden("small.ini")));
  const DatasetSplit split = load_split(c);
  CHECK(split.train.size() == 24);
  CHECK(split.validation.size() == 6);
  CHECK_FALSE(split.train[0] == split.validation[0]);
}
