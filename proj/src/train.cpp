#include "jscc/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "jscc/channel.hpp"
#include "jscc/checkpoint.hpp"
#include "jscc/metrics.hpp"
#include "jscc/receiver.hpp"
#include "jscc/rng.hpp"

namespace jscc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_abs2_error(const RealGrid& truth, const RealGrid& estimate) {
  double acc = 0.0;
  const std::size_t n = truth.size() / 2;
  for (std::size_t k = 0; k < n; ++k) {
    const double dr = estimate[2 * k] - truth[2 * k];
    const double di = estimate[2 * k + 1] - truth[2 * k + 1];
    acc += dr * dr + di * di;
  }
  return acc / static_cast<double>(n);
}

ModelParams prefixed(const ModelParams& src, const std::string& prefix) {
  ModelParams out;
  for (const auto& b : src.blocks()) out.add(prefix + b.name, b.value);
  return out;
}

ModelParams strip_prefix(const ModelParams& src, const std::string& prefix) {
  ModelParams out;
  for (const auto& b : src.blocks()) {
    if (b.name.starts_with(prefix)) out.add(b.name.substr(prefix.size()), b.value);
  }
  return out;
}

nlohmann::json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},           {"learning_rate", r.learning_rate},
          {"train_loss", r.train_loss}, {"val_reconstruction", r.val_reconstruction},
          {"val_channel", r.val_channel}, {"psnr_db", r.psnr_db},
          {"ce_mse", r.ce_mse},         {"papr_db", r.papr_db}};
}

// NaN is not representable in JSON; stored as null.
double number_or_nan(const nlohmann::json& j) { return j.is_null() ? kNaN : j.get<double>(); }

EpochRecord from_json(const nlohmann::json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.learning_rate = number_or_nan(j.at("learning_rate"));
  r.train_loss = number_or_nan(j.at("train_loss"));
  r.val_reconstruction = number_or_nan(j.at("val_reconstruction"));
  r.val_channel = number_or_nan(j.at("val_channel"));
  r.psnr_db = number_or_nan(j.at("psnr_db"));
  r.ce_mse = number_or_nan(j.at("ce_mse"));
  r.papr_db = number_or_nan(j.at("papr_db"));
  return r;
}

}  // namespace

EvalSummary evaluate(const ModelParams& params, const Architecture& arch, const ImageSet& images,
                     const EvalSettings& settings) {
  if (images.empty()) throw std::invalid_argument("evaluate: empty image set");
  if (settings.repeats == 0) throw std::invalid_argument("evaluate: repeats must be positive");
  const ChannelProfile profile(settings.channel_paths, settings.channel_decay);
  const double sigma2 = noise_variance_for_snr(settings.snr_db);
  const bool estimates = uses_channel_estimate(arch.mode);

  EvalSummary s;
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (std::size_t r = 0; r < settings.repeats; ++r) {
      const auto channel =
          sample_channel(profile, sigma2, derive_seed(settings.seed, Stream::channel, {i, r}));
      ad::Tape tape;
      BoundParams p(tape, params, false);
      ad::Var image = tape.constant(images[i]);
      LinkOutput out = run_link(p, arch, image, channel,
                                derive_seed(settings.seed, Stream::noise, {i, r}),
                                settings.clip_ratio);
      const RealGrid& recon = out.reconstruction.value();
      const double m = mse(images[i], recon);
      s.reconstruction_loss += m;
      s.psnr_db += psnr_from_mse(m);
      s.ssim += ssim(images[i], recon);
      s.papr_db += papr_db(out.transmitted.value().values());
      if (estimates) {
        const RealGrid& truth = out.h_true.value();
        s.ce_mse += mean_abs2_error(truth, out.h_estimate->value());
        s.ce_mse_mmse += mean_abs2_error(truth, out.h_mmse->value());
      }
      ++s.transmissions;
    }
  }
  const double n = static_cast<double>(s.transmissions);
  s.reconstruction_loss /= n;
  s.psnr_db /= n;
  s.ssim /= n;
  s.papr_db /= n;
  if (estimates) {
    s.ce_mse /= n;
    s.ce_mse_mmse /= n;
    s.channel_loss = s.ce_mse;
  } else {
    s.ce_mse = s.ce_mse_mmse = s.channel_loss = kNaN;
  }
  return s;
}

Trainer::Trainer(TrainingSetup setup, ImageSet train, ImageSet validation)
    : setup_(std::move(setup)),
      train_(std::move(train)),
      validation_(std::move(validation)),
      generator_opt_(setup_.adam),
      discriminator_opt_(setup_.adam) {
  if (train_.empty()) throw std::invalid_argument("Trainer: empty training set");
  if (validation_.empty()) throw std::invalid_argument("Trainer: empty validation set");
  if (setup_.epochs == 0 || setup_.batch_size == 0) {
    throw std::invalid_argument("Trainer: epochs and batch size must be positive");
  }
  for (const auto& img : train_) {
    if (img.shape() != setup_.arch.image_shape()) {
      throw std::invalid_argument("Trainer: image shape " + to_string(img.shape()) +
                                  " does not match the architecture's " +
                                  to_string(setup_.arch.image_shape()));
    }
  }
  params_ = build_model(setup_.arch, setup_.seed, setup_.lambda_g > 0.0);
}

bool operator==(const EpochRecord& a, const EpochRecord& b) {
  auto same = [](double x, double y) {
    return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
  };
  return a.epoch == b.epoch && same(a.learning_rate, b.learning_rate) &&
         same(a.train_loss, b.train_loss) && same(a.val_reconstruction, b.val_reconstruction) &&
         same(a.val_channel, b.val_channel) && same(a.psnr_db, b.psnr_db) &&
         same(a.ce_mse, b.ce_mse) && same(a.papr_db, b.papr_db);
}

double Trainer::learning_rate(std::size_t epoch) const {
  const std::size_t total = setup_.epochs, half = total / 2;
  const double lr = setup_.adam.learning_rate;
  if (epoch < half) return lr;
  // Epochs half .. total-1 step down towards zero without reaching it.
  return lr * static_cast<double>(total - std::min(epoch, total)) /
         static_cast<double>(total - half + 1);
}

EpochRecord Trainer::validate() const {
  EvalSettings s;
  s.channel_paths = setup_.channel_paths;
  s.channel_decay = setup_.channel_decay;
  s.snr_db = setup_.snr_db;
  s.clip_ratio = setup_.clip_ratio;
  s.repeats = setup_.val_repeats;
  s.seed = setup_.val_seed;
  const EvalSummary e = evaluate(params_, setup_.arch, validation_, s);
  EpochRecord r;
  r.epoch = epoch_;
  r.val_reconstruction = e.reconstruction_loss;
  r.val_channel = e.channel_loss;
  r.psnr_db = e.psnr_db;
  r.ce_mse = e.ce_mse;
  r.papr_db = e.papr_db;
  return r;
}

double Trainer::train_batch(std::span<const std::size_t> indices, double lr) {
  const Architecture& arch = setup_.arch;
  const ChannelProfile profile(setup_.channel_paths, setup_.channel_decay);
  const double sigma2 = noise_variance_for_snr(setup_.snr_db);
  const double inv_batch = 1.0 / static_cast<double>(indices.size());
  const bool adversarial = setup_.lambda_g > 0.0;
  const bool channel_term = uses_channel_estimate(arch.mode);

  params_.zero_grad();
  ImageSet fakes;
  double batch_loss = 0.0;
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const RealGrid& img = train_[indices[b]];
    const auto channel =
        sample_channel(profile, sigma2, derive_seed(setup_.seed, Stream::channel, {step_, b}));
    ad::Tape tape;
    BoundParams p(tape, params_, true);
    ad::Var image = tape.constant(img);
    LinkOutput out = run_link(p, arch, image, channel,
                              derive_seed(setup_.seed, Stream::noise, {step_, b}),
                              setup_.clip_ratio);
    LossTerms terms = losses(image, out.reconstruction, out.h_true,
                             channel_term ? out.h_estimate : std::nullopt, setup_.lambda_c);
    ad::Var total = terms.total;
    if (adversarial) {
      BoundParams frozen(tape, params_, false);
      ad::Var g = lsgan_generator_loss(discriminate(frozen, arch, out.reconstruction));
      total = ad::add(total, ad::scale(g, setup_.lambda_g));
      fakes.push_back(out.reconstruction.value());
    }
    const double value = total.value().item();
    if (!std::isfinite(value)) {
      throw std::runtime_error("non-finite loss " + std::to_string(value) + " at step " +
                               std::to_string(step_) + ", batch element " + std::to_string(b) +
                               " (image " + std::to_string(indices[b]) + ")");
    }
    batch_loss += value;
    tape.backward(ad::scale(total, inv_batch));
    p.accumulate_grads(params_);
  }
  generator_opt_.step(params_, lr, [](const std::string& n) { return !is_discriminator_block(n); });

  if (adversarial) {
    params_.zero_grad();
    for (std::size_t b = 0; b < indices.size(); ++b) {
      ad::Tape tape;
      BoundParams d(tape, params_, true);
      ad::Var real = discriminate(d, arch, tape.constant(train_[indices[b]]));
      ad::Var fake = discriminate(d, arch, tape.constant(fakes[b]));
      tape.backward(ad::scale(lsgan_discriminator_loss(real, fake), inv_batch));
      d.accumulate_grads(params_);
    }
    discriminator_opt_.step(params_, lr, [](const std::string& n) { return is_discriminator_block(n); });
  }
  ++step_;
  return batch_loss * inv_batch;
}

EpochRecord Trainer::run_epoch() {
  if (epoch_ >= setup_.epochs) throw std::logic_error("Trainer: all epochs already run");
  std::vector<std::size_t> order(train_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(setup_.seed, Stream::shuffle, {epoch_}));
  std::shuffle(order.begin(), order.end(), rng);

  const double lr = learning_rate(epoch_);
  double loss = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order.size(); start += setup_.batch_size) {
    const std::size_t end = std::min(order.size(), start + setup_.batch_size);
    loss += train_batch(std::span(order).subspan(start, end - start), lr);
    ++batches;
  }
  ++epoch_;
  EpochRecord r = validate();
  r.learning_rate = lr;
  r.train_loss = loss / static_cast<double>(batches);
  history_.push_back(r);
  return r;
}

const std::vector<EpochRecord>& Trainer::run(const std::function<void(const EpochRecord&)>& on_epoch) {
  if (history_.empty()) {
    EpochRecord r = validate();
    r.train_loss = kNaN;
    history_.push_back(r);
    if (on_epoch) on_epoch(r);
  }
  while (epoch_ < setup_.epochs) {
    EpochRecord r = run_epoch();
    if (on_epoch) on_epoch(r);
  }
  return history_;
}

void Trainer::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "model.ckpt", params_);

  ModelParams opt;
  for (const auto& [prefix, adam] : {std::pair{"generator", &generator_opt_},
                                     std::pair{"discriminator", &discriminator_opt_}}) {
    const ModelParams m = prefixed(adam->first_moment(), std::string(prefix) + ".m/");
    const ModelParams v = prefixed(adam->second_moment(), std::string(prefix) + ".v/");
    for (const auto& b : m.blocks()) opt.add(b.name, b.value);
    for (const auto& b : v.blocks()) opt.add(b.name, b.value);
  }
  save_checkpoint(dir / "optimizer.ckpt", opt);

  nlohmann::json state;
  state["epoch"] = epoch_;
  state["step"] = step_;
  state["seed"] = setup_.seed;
  state["mode"] = to_string(setup_.arch.mode);
  state["generator_steps"] = generator_opt_.steps();
  state["discriminator_steps"] = discriminator_opt_.steps();
  state["history"] = nlohmann::json::array();
  for (const auto& r : history_) state["history"].push_back(to_json(r));
  std::ofstream out(dir / "state.json");
  out << state.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + (dir / "state.json").string());
}

void Trainer::restore(const std::filesystem::path& dir) {
  std::ifstream in(dir / "state.json");
  if (!in) throw std::runtime_error("cannot open " + (dir / "state.json").string());
  const nlohmann::json state = nlohmann::json::parse(in);
  if (state.at("seed").get<std::uint64_t>() != setup_.seed ||
      state.at("mode").get<std::string>() != to_string(setup_.arch.mode)) {
    throw std::invalid_argument("restore: saved state in " + dir.string() +
                                " was produced with a different seed or mode");
  }
  ModelParams loaded = load_checkpoint(dir / "model.ckpt");
  if (loaded.blocks().size() != params_.blocks().size()) {
    throw std::invalid_argument("restore: checkpoint block count does not match the model");
  }
  for (const auto& b : loaded.blocks()) {
    ParamBlock& target = params_.at(b.name);
    if (target.value.shape() != b.value.shape()) {
      throw std::invalid_argument("restore: block " + b.name + " has shape " +
                                  to_string(b.value.shape()) + ", expected " +
                                  to_string(target.value.shape()));
    }
    target.value = b.value;
  }
  const ModelParams opt = load_checkpoint(dir / "optimizer.ckpt");
  generator_opt_.restore(strip_prefix(opt, "generator.m/"), strip_prefix(opt, "generator.v/"),
                         state.at("generator_steps").get<std::uint64_t>());
  discriminator_opt_.restore(strip_prefix(opt, "discriminator.m/"),
                             strip_prefix(opt, "discriminator.v/"),
                             state.at("discriminator_steps").get<std::uint64_t>());
  epoch_ = state.at("epoch").get<std::size_t>();
  step_ = state.at("step").get<std::uint64_t>();
  history_.clear();
  for (const auto& r : state.at("history")) history_.push_back(from_json(r));
}

}  // namespace jscc
