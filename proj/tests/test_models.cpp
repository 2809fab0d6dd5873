#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "jscc/checkpoint.hpp"
#include "jscc/dataset.hpp"
#include "jscc/models.hpp"
#include "jscc/ofdm.hpp"
#include "jscc/receiver.hpp"
#include "jscc/train.hpp"
#include "test_util.hpp"

using namespace jscc;
namespace fs = std::filesystem;

namespace {

// 16x16 images, 4x4 latents, 16 subcarriers, one pilot and two data symbols.
Architecture tiny(DecoderMode mode) {
  Architecture a;
  a.image_size = 16;
  a.width = 6;
  a.res_blocks = 1;
  a.subnet_width = 4;
  a.disc_width = 4;
  a.mode = mode;
  a.ofdm.fft_size = 16;
  a.ofdm.cp_length = 4;
  a.ofdm.pilot_symbols = 1;
  a.ofdm.data_symbols = 2;
  return a;
}

TrainingSetup tiny_setup(DecoderMode mode, std::size_t epochs = 2) {
  TrainingSetup s;
  s.arch = tiny(mode);
  s.channel_paths = 4;
  s.epochs = epochs;
  s.batch_size = 4;
  s.snr_db = 10.0;
  s.seed = 3;
  return s;
}

const DecoderMode kAllModes[] = {DecoderMode::direct, DecoderMode::ofdm_blackbox,
                                 DecoderMode::ofdm_ce_eq, DecoderMode::ofdm_ce_eq_subnets,
                                 DecoderMode::ofdm_feedback};

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("jscc_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("mode names round-trip and unknown names are rejected") {
  for (DecoderMode m : kAllModes) CHECK(parse_decoder_mode(to_string(m)) == m);
  CHECK(to_string(DecoderMode::ofdm_ce_eq_subnets) == "ofdm-ce-eq-subnets");
  CHECK_THROWS_AS(parse_decoder_mode("ofdm-magic"), std::invalid_argument);
  try {
    parse_decoder_mode("ofdm-magic");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("ofdm-blackbox") != std::string::npos);
  }
}

TEST_CASE("default geometry: 32x32x3 images, d=2 and 12 latent channels") {
  Architecture a;
  CHECK(a.latent_channels() == 12);
  CHECK(a.latent_shape() == Shape{12, 8, 8});
  ModelParams params = build_model(a, 1);
  ad::Tape t;
  BoundParams p(t, params, false);
  ad::Var z = encode(p, a, t.constant(synthetic_patches(1, 1, 32)[0]));
  CHECK(z.shape() == Shape{12, 8, 8});
  ad::Var sym = power_normalize(map_symbols(z, a.ofdm));
  double power = 0.0;
  for (double v : sym.value().values()) power += v * v;
  CHECK(std::abs(power / 384.0 - 1.0) < 1e-9);
}

TEST_CASE("architecture validation") {
  Architecture a;
  a.image_size = 30;
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
  Architecture b;
  b.ofdm.fft_size = 48;
  b.ofdm.data_symbols = 8;
  CHECK_THROWS_AS(b.validate(), std::invalid_argument);
  Architecture c = tiny(DecoderMode::ofdm_ce_eq);
  c.image_size = 12;  // 12 % 4 == 0 but not divisible by 8
  c.ofdm.fft_size = 9;
  c.ofdm.data_symbols = 2;
  CHECK_THROWS_AS(build_model(c, 1, true), std::invalid_argument);
  CHECK(tiny(DecoderMode::direct).latent_channels() == 7);
}

TEST_CASE("every mode produces a [0, 1] image of the source shape") {
  for (DecoderMode m : kAllModes) {
    CAPTURE(to_string(m));
    Architecture a = tiny(m);
    ModelParams params = build_model(a, 5);
    ad::Tape t;
    BoundParams p(t, params, false);
    RealGrid img = testutil::randn(a.image_shape(), 6);
    for (double& v : img.values()) v = 1.0 / (1.0 + std::exp(-v));
    auto ch = sample_channel(ChannelProfile(4, 4.0), 0.1, 7);
    LinkOutput out = run_link(p, a, t.constant(img), ch, 8);
    CHECK(out.reconstruction.shape() == a.image_shape());
    for (double v : out.reconstruction.value().values()) CHECK((v >= 0.0 && v <= 1.0));
    CHECK(out.transmitted.shape() == Shape{a.channel_uses(), 2});
    CHECK(out.h_estimate.has_value() == uses_channel_estimate(m));
  }
}

TEST_CASE("zeroed subnet heads reproduce the plain MMSE receiver bit for bit") {
  Architecture with = tiny(DecoderMode::ofdm_ce_eq_subnets);
  Architecture without = tiny(DecoderMode::ofdm_ce_eq);
  ModelParams pw = build_model(with, 11);
  ModelParams po = build_model(without, 11);
  for (const auto& b : po.blocks()) CHECK(pw.at(b.name).value == b.value);
  for (std::uint64_t s = 0; s < 5; ++s) {
    RealGrid img = synthetic_patches(s, 1, 16)[0];
    auto ch = sample_channel(ChannelProfile(4, 4.0), 0.1, 100 + s);
    ad::Tape t1, t2;
    BoundParams b1(t1, pw, false), b2(t2, po, false);
    LinkOutput o1 = run_link(b1, with, t1.constant(img), ch, 200 + s);
    LinkOutput o2 = run_link(b2, without, t2.constant(img), ch, 200 + s);
    CHECK(o1.reconstruction.value() == o2.reconstruction.value());
    CHECK(o1.h_estimate->value() == o2.h_estimate->value());
  }
}

TEST_CASE("LSGAN loss examples") {
  ad::Tape t;
  auto s = [&](double v) { return t.constant(RealGrid::scalar(v)); };
  CHECK(lsgan_discriminator_loss(s(1.0), s(0.0)).value().item() == 0.0);
  CHECK(lsgan_discriminator_loss(s(0.5), s(0.5)).value().item() == 0.5);
  CHECK(lsgan_generator_loss(s(0.5)).value().item() == 0.25);
  CHECK(lsgan_generator_loss(s(1.0)).value().item() == 0.0);

  // A discriminator with zero kernels outputs its head bias everywhere.
  Architecture a = tiny(DecoderMode::ofdm_ce_eq);
  ModelParams params = build_model(a, 1, true);
  for (auto& b : params.blocks()) {
    if (!is_discriminator_block(b.name)) continue;
    for (double& v : b.value.values()) v = 0.0;
  }
  params.at("discriminator.head.bias").value[0] = 0.5;
  const ImageSet imgs = synthetic_patches(2, 3, 16);
  const ImageSet recs = synthetic_patches(3, 3, 16);
  LsganValues v = lsgan_losses(params, a, imgs, recs);
  CHECK(v.generator == doctest::Approx(0.25));
  CHECK(v.discriminator == doctest::Approx(0.5));
}

TEST_CASE("every trainable block receives gradient after one update") {
  for (DecoderMode m : kAllModes) {
    CAPTURE(to_string(m));
    Architecture a = tiny(m);
    ModelParams params = build_model(a, 21);
    const RealGrid img = synthetic_patches(4, 1, 16)[0];
    const auto ch = sample_channel(ChannelProfile(4, 4.0), 0.1, 22);
    auto grads = [&] {
      params.zero_grad();
      ad::Tape t;
      BoundParams p(t, params, true);
      LinkOutput out = run_link(p, a, t.constant(img), ch, 23);
      LossTerms l = losses(t.constant(img), out.reconstruction, out.h_true, out.h_estimate, 0.5);
      t.backward(l.total);
      p.accumulate_grads(params);
    };
    grads();
    Adam adam;
    adam.step(params, 5e-4);
    grads();
    for (const auto& b : params.blocks()) {
      CAPTURE(b.name);
      double norm = 0.0;
      for (double g : b.grad) norm += g * g;
      CHECK(norm > 0.0);
    }
  }
}

TEST_CASE("checkpoint round trip is bit-exact") {
  ModelParams params = build_model(tiny(DecoderMode::ofdm_feedback), 9, true);
  std::stringstream buf;
  write_checkpoint(buf, params);
  ModelParams back = read_checkpoint(buf);
  CHECK(back == params);
  CHECK(back.blocks().size() == params.blocks().size());

  const std::string bytes = buf.str();
  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_checkpoint(truncated), std::runtime_error);
  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream bad_magic(bad);
  CHECK_THROWS_AS(read_checkpoint(bad_magic), std::runtime_error);
  CHECK_THROWS(load_checkpoint("/nonexistent/model.ckpt"));
}

TEST_CASE("learning rate is flat for the first half, then decays linearly") {
  TrainingSetup s = tiny_setup(DecoderMode::ofdm_ce_eq, 20);
  Trainer tr(s, synthetic_patches(1, 4, 16), synthetic_patches(2, 2, 16));
  CHECK(tr.learning_rate(0) == 5e-4);
  CHECK(tr.learning_rate(9) == 5e-4);
  CHECK(tr.learning_rate(10) < 5e-4);
  CHECK(tr.learning_rate(19) < tr.learning_rate(15));
  CHECK(tr.learning_rate(19) > 0.0);
}

TEST_CASE("training is deterministic and lambda_g = 0 trains no discriminator") {
  const ImageSet train = synthetic_patches(1, 12, 16), val = synthetic_patches(2, 4, 16);
  Trainer a(tiny_setup(DecoderMode::ofdm_ce_eq_subnets), train, val);
  Trainer b(tiny_setup(DecoderMode::ofdm_ce_eq_subnets), train, val);
  a.run();
  b.run();
  CHECK(a.history() == b.history());
  CHECK(a.params() == b.params());
  CHECK(a.history().size() == 3);
  for (const auto& blk : a.params().blocks()) CHECK_FALSE(is_discriminator_block(blk.name));
  CHECK(a.history().back().val_reconstruction < a.history().front().val_reconstruction);
}

TEST_CASE("adversarial training updates both players") {
  TrainingSetup s = tiny_setup(DecoderMode::ofdm_ce_eq, 1);
  s.lambda_g = 1e-3;
  const ImageSet train = synthetic_patches(1, 8, 16), val = synthetic_patches(2, 2, 16);
  Trainer tr(s, train, val);
  const ModelParams before = tr.params();
  tr.run();
  bool disc_moved = false, enc_moved = false;
  for (const auto& b : tr.params().blocks()) {
    const bool moved = !(b.value == before.at(b.name).value);
    if (is_discriminator_block(b.name)) disc_moved = disc_moved || moved;
    if (b.name.starts_with("encoder.")) enc_moved = enc_moved || moved;
  }
  CHECK(disc_moved);
  CHECK(enc_moved);
}

TEST_CASE("resuming from a checkpoint reproduces the uninterrupted run") {
  for (double lambda_g : {0.0, 1e-3}) {
    CAPTURE(lambda_g);
    const ImageSet train = synthetic_patches(1, 12, 16), val = synthetic_patches(2, 4, 16);
    TrainingSetup s = tiny_setup(DecoderMode::ofdm_ce_eq_subnets, 3);
    s.lambda_g = lambda_g;
    const fs::path dir = scratch_dir("resume");
    Trainer full(s, train, val);
    full.run([&](const EpochRecord& r) {
      if (r.epoch == 1) full.save(dir);
    });
    Trainer resumed(s, train, val);
    resumed.restore(dir);
    CHECK(resumed.epoch() == 1);
    resumed.run();
    CHECK(resumed.history() == full.history());
    CHECK(resumed.params() == full.params());

    TrainingSetup other = s;
    other.seed = 99;
    Trainer wrong(other, train, val);
    CHECK_THROWS_AS(wrong.restore(dir), std::invalid_argument);
    fs::remove_all(dir);
  }
}

TEST_CASE("a non-finite loss aborts and names the step") {
  ImageSet train = synthetic_patches(1, 4, 16);
  train[2][7] = std::numeric_limits<double>::quiet_NaN();
  Trainer tr(tiny_setup(DecoderMode::ofdm_ce_eq, 1), train, synthetic_patches(2, 2, 16));
  try {
    tr.run_epoch();
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("evaluation uses the same channel draws for every model") {
  const ImageSet val = synthetic_patches(2, 3, 16);
  EvalSettings settings;
  settings.channel_paths = 4;
  settings.repeats = 2;
  Architecture a = tiny(DecoderMode::ofdm_ce_eq);
  ModelParams p1 = build_model(a, 1), p2 = build_model(a, 2);
  EvalSummary s1 = evaluate(p1, a, val, settings), s2 = evaluate(p2, a, val, settings);
  CHECK(s1.transmissions == 6);
  // MMSE-only estimates do not depend on the network weights.
  CHECK(s1.ce_mse == s2.ce_mse);
  CHECK(s1.ce_mse == s1.ce_mse_mmse);
  CHECK(std::isnan(evaluate(build_model(tiny(DecoderMode::direct), 1), tiny(DecoderMode::direct), val,
                            settings).ce_mse));
}
