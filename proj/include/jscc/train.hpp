#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "jscc/dataset.hpp"
#include "jscc/models.hpp"
#include "jscc/nn.hpp"

namespace jscc {

/// Channel and repetition settings for evaluating a model.
struct EvalSettings {
  std::size_t channel_paths = 8;
  double channel_decay = 4.0;
  double snr_db = 15.0;
  double clip_ratio = kNoClipping;
  std::size_t repeats = 5;
  std::uint64_t seed = 20240501;
};

/// Means over images x repeats. CE fields are NaN for modes without a
/// channel estimate.
struct EvalSummary {
  double reconstruction_loss = 0.0;
  double channel_loss = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double ce_mse = 0.0;
  double ce_mse_mmse = 0.0;
  double papr_db = 0.0;
  std::size_t transmissions = 0;
};

/// Sends every image `repeats` times through fresh channel and noise draws
/// derived from (seed, image, repeat), so different models see identical
/// realizations.
EvalSummary evaluate(const ModelParams& params, const Architecture& arch, const ImageSet& images,
                     const EvalSettings& settings);

struct TrainingSetup {
  Architecture arch;
  std::size_t channel_paths = 8;
  double channel_decay = 4.0;
  double snr_db = 15.0;
  double lambda_c = 0.5;
  double lambda_g = 0.0;
  double clip_ratio = kNoClipping;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  AdamOptions adam;
  std::uint64_t seed = 1;
  /// Validation pass after each epoch.
  std::size_t val_repeats = 1;
  std::uint64_t val_seed = 20240501;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0 is the untrained model
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double val_reconstruction = 0.0;
  double val_channel = 0.0;
  double psnr_db = 0.0;
  double ce_mse = 0.0;
  double papr_db = 0.0;

  /// Bitwise on every field, so NaN entries (epoch 0 train loss, CE MSE of
  /// modes without an estimate) compare equal to themselves.
  friend bool operator==(const EpochRecord& a, const EpochRecord& b);
};

/// Owns the parameters and optimizer state of one training run.
class Trainer {
 public:
  Trainer(TrainingSetup setup, ImageSet train, ImageSet validation);

  const TrainingSetup& setup() const noexcept { return setup_; }
  const ModelParams& params() const noexcept { return params_; }
  std::size_t epoch() const noexcept { return epoch_; }
  std::uint64_t step() const noexcept { return step_; }
  const std::vector<EpochRecord>& history() const noexcept { return history_; }

  /// Constant for the first half of the epochs, then linear decay.
  double learning_rate(std::size_t epoch) const;

  /// Validation metrics of the current parameters.
  EpochRecord validate() const;

  /// Trains one epoch and appends its record. Throws std::runtime_error
  /// naming the step on a non-finite loss.
  EpochRecord run_epoch();

  /// Records epoch 0 when nothing has run yet, then trains up to
  /// setup().epochs.
  const std::vector<EpochRecord>& run(const std::function<void(const EpochRecord&)>& on_epoch = {});

  /// Writes model.ckpt, optimizer.ckpt and state.json into `dir`.
  void save(const std::filesystem::path& dir) const;
  /// Restores a state written by save(); the setup must match.
  void restore(const std::filesystem::path& dir);

 private:
  double train_batch(std::span<const std::size_t> indices, double lr);

  TrainingSetup setup_;
  ImageSet train_;
  ImageSet validation_;
  ModelParams params_;
  Adam generator_opt_;
  Adam discriminator_opt_;
  std::size_t epoch_ = 0;
  std::uint64_t step_ = 0;
  std::vector<EpochRecord> history_;
};

}  // namespace jscc
