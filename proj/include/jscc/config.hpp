#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "jscc/dataset.hpp"
#include "jscc/models.hpp"
#include "jscc/nn.hpp"

namespace jscc {

/// Flat sectioned key = value configuration for one experiment.
struct ExperimentConfig {
  OfdmConfig ofdm;

  std::size_t channel_paths = 8;
  double channel_decay = 4.0;
  double snr_db = 15.0;

  DecoderMode mode = DecoderMode::ofdm_ce_eq_subnets;
  std::size_t latent_channels = 0;  // 0 derives C from the OFDM layout
  std::size_t downsample = 2;
  std::size_t width = 16;
  std::size_t res_blocks = 2;
  std::size_t subnet_width = 8;
  std::size_t disc_width = 16;
  double lambda_c = 0.5;
  double lambda_g = 0.0;
  double clip_ratio = kNoClipping;

  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double learning_rate = 5e-4;
  std::uint64_t seed = 1;

  DatasetSpec data;
  std::size_t val_count = 100;

  std::size_t eval_repeats = 5;
  std::uint64_t eval_seed = 20240501;

  std::filesystem::path output_dir = "out";

  Architecture architecture() const;

  /// Throws std::invalid_argument naming the offending key.
  void validate() const;
};

/// Parses the text form; unknown sections or keys and malformed values are
/// errors that name the line. Keys not present keep their defaults.
ExperimentConfig parse_config(std::string_view text);
/// Canonical text form; parse_config(serialize(c)) serializes identically.
std::string serialize(const ExperimentConfig& config);

ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies JSCC_OUTPUT_DIR when set.
void apply_environment(ExperimentConfig& config);

/// Shortest decimal text that parses back to `v`; "inf" for infinity.
std::string format_double(double v);

}  // namespace jscc
