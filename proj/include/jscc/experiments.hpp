#pragma once

#include <cstddef>
#include <iosfwd>
#include <mutex>
#include <string>
#include <vector>

#include "jscc/config.hpp"
#include "jscc/dataset.hpp"
#include "jscc/train.hpp"

namespace jscc {

/// One evaluated operating point.
struct MetricsRow {
  std::string experiment;
  double snr_db = 0.0;
  std::size_t n_s = 0;
  std::size_t n_p = 0;
  double clip_ratio = kNoClipping;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double ce_mse = 0.0;
  double ce_mse_mmse = 0.0;
  double papr_db = 0.0;
  double cpp = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "experiment,snr_db,n_s,n_p,clip_ratio,psnr_db,ssim,ce_mse,ce_mse_mmse,papr_db,cpp";

/// (N_p + N_s)(L_fft + L_cp) / (H W C_img).
double channel_uses_per_pixel(const OfdmConfig& ofdm, std::size_t height, std::size_t width,
                              std::size_t image_channels = 3);
/// Transmitted complex samples per pixel; differs from the OFDM formula
/// only in direct mode.
double channel_uses_per_pixel(const Architecture& arch);

/// Writes the header on construction; rows are serialized under a lock.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out);
  void write(const MetricsRow& row);

 private:
  std::ostream& out_;
  std::mutex mutex_;
};

std::string format_row(const MetricsRow& row);
/// Parses CSV text produced by CsvWriter; throws on a header or field
/// count mismatch.
std::vector<MetricsRow> parse_metrics_csv(std::istream& in);

inline constexpr const char* kTrainLogHeader =
    "epoch,learning_rate,train_loss,val_reconstruction,val_channel,psnr_db,ce_mse,papr_db";
std::string format_epoch(const EpochRecord& record);

struct DatasetSplit {
  ImageSet train;
  ImageSet validation;
};

/// Synthetic data draws a separate validation set; file datasets hold back
/// the last val_count patches.
DatasetSplit load_split(const ExperimentConfig& config);

TrainingSetup training_setup(const ExperimentConfig& config);
EvalSettings eval_settings(const ExperimentConfig& config);

MetricsRow make_row(const std::string& experiment, const Architecture& arch,
                    const EvalSettings& settings, const EvalSummary& summary);

std::vector<MetricsRow> sweep_snr(const ModelParams& params, const Architecture& arch,
                                  const ImageSet& images, EvalSettings settings,
                                  const std::vector<double>& snrs,
                                  const std::string& experiment = "sweep-snr");

std::vector<MetricsRow> sweep_multipath(const ModelParams& params, const Architecture& arch,
                                        const ImageSet& images, EvalSettings settings,
                                        const std::vector<std::size_t>& paths,
                                        const std::string& experiment = "sweep-multipath");

std::vector<MetricsRow> papr_report(const ModelParams& params, const Architecture& arch,
                                    const ImageSet& images, EvalSettings settings,
                                    const std::vector<double>& ratios,
                                    const std::string& experiment = "papr-report");

/// (N_p, N_s) pairs with N_p + N_s = budget and N_p = 1..max_pilots.
std::vector<std::pair<std::size_t, std::size_t>> pilot_splits(std::size_t budget,
                                                              std::size_t max_pilots = 3);

/// Trains and evaluates one model per pilot split of `budget`.
std::vector<MetricsRow> sweep_pilots(const ExperimentConfig& base, std::size_t budget,
                                     const DatasetSplit& data, std::size_t max_pilots = 3);

}  // namespace jscc
