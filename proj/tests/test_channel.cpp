#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "jscc/channel.hpp"
#include "test_util.hpp"

using namespace jscc;
using testutil::grid;
using testutil::randn;

TEST_CASE("profile powers follow the exponential decay and sum to one") {
  for (std::size_t paths : {1u, 2u, 5u, 8u, 17u}) {
    for (double decay : {0.5, 1.0, 4.0, 30.0}) {
      ChannelProfile p(paths, decay);
      double total = 0.0;
      for (double v : p.path_power()) total += v;
      CHECK(std::abs(total - 1.0) < 1e-12);
      for (std::size_t l = 1; l < paths; ++l) {
        CHECK(p.path_power()[l] / p.path_power()[l - 1] == doctest::Approx(std::exp(-1.0 / decay)));
      }
    }
  }
}

TEST_CASE("first path power for L=8, decay 4") {
  double geometric = 0.0;
  for (int l = 0; l < 8; ++l) geometric += std::exp(-l / 4.0);
  ChannelProfile p(8, 4.0);
  CHECK(p.path_power()[0] == doctest::Approx(1.0 / geometric).epsilon(1e-12));
  CHECK(p.path_power()[0] == doctest::Approx(0.2558).epsilon(1e-3));
}

TEST_CASE("invalid profiles are rejected") {
  CHECK_THROWS_AS(ChannelProfile(0, 4.0), std::invalid_argument);
  CHECK_THROWS_AS(ChannelProfile(8, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(ChannelProfile(8, -1.0), std::invalid_argument);
}

TEST_CASE("single-path taps have unit mean power") {
  ChannelProfile p(1, 4.0);
  double acc = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const RealGrid h = sample_channel(p, 0.0, static_cast<std::uint64_t>(i)).taps();
    acc += h[0] * h[0] + h[1] * h[1];
  }
  CHECK(acc / draws == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("per-path tap power matches the profile") {
  ChannelProfile p(8, 4.0);
  std::vector<double> acc(8, 0.0);
  const int draws = 40000;
  for (int i = 0; i < draws; ++i) {
    const RealGrid h = sample_channel(p, 0.0, 1000 + static_cast<std::uint64_t>(i)).taps();
    for (int l = 0; l < 8; ++l) acc[l] += h[2 * l] * h[2 * l] + h[2 * l + 1] * h[2 * l + 1];
  }
  for (int l = 0; l < 8; ++l) {
    CHECK(acc[l] / draws == doctest::Approx(p.path_power()[l]).epsilon(0.04));
  }
}

TEST_CASE("sampling is deterministic given the seed") {
  ChannelProfile p(8, 4.0);
  CHECK(sample_channel(p, 0.1, 42).taps() == sample_channel(p, 0.1, 42).taps());
  CHECK_FALSE(sample_channel(p, 0.1, 42).taps() == sample_channel(p, 0.1, 43).taps());
}

TEST_CASE("identity channel passes the signal through") {
  ChannelRealization ch(grid({1, 2}, {1, 0}), 0.0, 0);
  ad::Tape t;
  RealGrid y = randn({10, 2}, 1);
  CHECK(apply_channel(t.constant(y), ch, 5).value() == y);
}

TEST_CASE("unit delay shifts samples by one") {
  ChannelRealization ch(grid({2, 2}, {0, 0, 1, 0}), 0.0, 0);
  ad::Tape t;
  ad::Var out = apply_channel(t.constant(grid({3, 2}, {1, 2, 3, 4, 5, 6})), ch, 5);
  CHECK(out.value() == grid({3, 2}, {0, 0, 1, 2, 3, 4}));
}

TEST_CASE("channel errors") {
  ChannelRealization ch(randn({4, 2}, 2), 0.1, 0);
  ad::Tape t;
  CHECK_THROWS(apply_channel(t.constant(RealGrid({0, 2})), ch, 1));
  CHECK_THROWS(apply_channel(t.constant(RealGrid({3, 2})), ch, 1));
}

TEST_CASE("noise calibration with a silent input") {
  ChannelRealization ch(grid({1, 2}, {1, 0}), 0.3, 0);
  ad::Tape t;
  const std::size_t n = 1000000;
  ad::Var out = apply_channel(t.constant(RealGrid({n, 2})), ch, 77);
  double p = 0.0;
  for (double v : out.value().values()) p += v * v;
  CHECK(p / n == doctest::Approx(0.3).epsilon(0.01));
}

TEST_CASE("the channel is linear in its input for a fixed noise draw") {
  ChannelRealization ch(randn({8, 2}, 3), 0.2, 0);
  RealGrid y1 = randn({40, 2}, 4), y2 = randn({40, 2}, 5);
  ad::Tape t;
  const RealGrid noise = apply_channel(t.constant(RealGrid({40, 2})), ch, 9).value();
  auto clean = [&](const RealGrid& y) {
    RealGrid out = apply_channel(t.constant(y), ch, 9).value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= noise[i];
    return out;
  };
  const double a = 0.7, b = -1.3;
  RealGrid mix({40, 2});
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * y1[i] + b * y2[i];
  const RealGrid lhs = clean(mix), c1 = clean(y1), c2 = clean(y2);
  for (std::size_t i = 0; i < lhs.size(); ++i) CHECK(std::abs(lhs[i] - (a * c1[i] + b * c2[i])) < 1e-12);
}

TEST_CASE("noiseless output equals the brute-force truncated convolution") {
  RealGrid taps = randn({5, 2}, 6);
  ChannelRealization ch(taps, 0.0, 0);
  RealGrid y = randn({20, 2}, 7);
  ad::Tape t;
  auto out = testutil::to_complex(apply_channel(t.constant(y), ch, 0).value());
  auto h = testutil::to_complex(taps), x = testutil::to_complex(y);
  for (std::size_t n = 0; n < 20; ++n) {
    testutil::cd acc = 0;
    for (std::size_t l = 0; l < 5 && l <= n; ++l) acc += h[l] * x[n - l];
    CHECK(std::abs(out[n] - acc) < 1e-12);
  }
}

TEST_CASE("frequency response is the zero-padded DFT of the taps") {
  RealGrid taps = randn({8, 2}, 8);
  auto h = testutil::to_complex(frequency_response(taps, 64));
  auto ref = testutil::brute_dft(testutil::to_complex(taps), 64);
  for (std::size_t k = 0; k < 64; ++k) CHECK(std::abs(h[k] - ref[k]) < 1e-12);
}

TEST_CASE("receiver SNR") {
  RealGrid y({4, 2});
  for (std::size_t k = 0; k < 4; ++k) y[2 * k] = std::sqrt(10.0);
  CHECK(receiver_snr_db(y.values(), 1.0) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(receiver_snr_db(y.values(), 10.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK_THROWS(receiver_snr_db(y.values(), 0.0));
  CHECK(noise_variance_for_snr(10.0) == doctest::Approx(0.1));
}

TEST_CASE("receiver SNR of a unit-power transmission is about 10 dB at sigma^2 = 0.1") {
  ChannelProfile p(8, 4.0);
  double mean_power = 0.0;
  const int realizations = 10000;
  Rng rng(3);
  for (int i = 0; i < realizations; ++i) {
    auto ch = sample_channel(p, 0.1, 5000 + static_cast<std::uint64_t>(i));
    ad::Tape t;
    RealGrid y = complex_gaussian(80, 1.0, rng);
    const RealGrid out = apply_channel(t.constant(y), ch, 9000 + static_cast<std::uint64_t>(i)).value();
    double s = 0.0;
    for (std::size_t n = 8; n < 80; ++n) s += out[2 * n] * out[2 * n] + out[2 * n + 1] * out[2 * n + 1];
    mean_power += s / 72.0;
  }
  mean_power /= realizations;
  // Received power includes the noise; signal-only SNR is the ratio minus one.
  const double snr = 10.0 * std::log10((mean_power - 0.1) / 0.1);
  CHECK(std::abs(snr - 10.0) < 0.2);
}
