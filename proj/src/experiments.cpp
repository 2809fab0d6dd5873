#include "jscc/experiments.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "jscc/rng.hpp"

namespace jscc {

double channel_uses_per_pixel(const OfdmConfig& ofdm, std::size_t height, std::size_t width,
                              std::size_t image_channels) {
  return static_cast<double>(ofdm.packet_length()) /
         static_cast<double>(height * width * image_channels);
}

double channel_uses_per_pixel(const Architecture& arch) {
  return static_cast<double>(arch.channel_uses()) /
         static_cast<double>(arch.image_size * arch.image_size * arch.image_channels);
}

CsvWriter::CsvWriter(std::ostream& out) : out_(out) { out_ << kMetricsHeader << '\n'; }

void CsvWriter::write(const MetricsRow& row) {
  std::lock_guard lock(mutex_);
  out_ << format_row(row) << '\n';
  out_.flush();
}

std::string format_row(const MetricsRow& r) {
  std::string s = r.experiment;
  for (const std::string& f :
       {format_double(r.snr_db), std::to_string(r.n_s), std::to_string(r.n_p),
        format_double(r.clip_ratio), format_double(r.psnr_db), format_double(r.ssim),
        format_double(r.ce_mse), format_double(r.ce_mse_mmse), format_double(r.papr_db),
        format_double(r.cpp)}) {
    s += ',' + f;
  }
  return s;
}

std::string format_epoch(const EpochRecord& r) {
  std::string s = std::to_string(r.epoch);
  for (double v : {r.learning_rate, r.train_loss, r.val_reconstruction, r.val_channel, r.psnr_db,
                   r.ce_mse, r.papr_db}) {
    s += ',' + format_double(v);
  }
  return s;
}

namespace {

double parse_field(const std::string& s) {
  if (s == "nan" || s == "-nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

}  // namespace

std::vector<MetricsRow> parse_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw std::invalid_argument("metrics csv: unexpected header '" + line + "'");
  }
  std::vector<MetricsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 11) {
      throw std::invalid_argument("metrics csv line " + std::to_string(line_no) + ": expected 11 fields, got " +
                                  std::to_string(f.size()));
    }
    MetricsRow r;
    r.experiment = f[0];
    r.snr_db = parse_field(f[1]);
    r.n_s = std::stoul(f[2]);
    r.n_p = std::stoul(f[3]);
    r.clip_ratio = parse_field(f[4]);
    r.psnr_db = parse_field(f[5]);
    r.ssim = parse_field(f[6]);
    r.ce_mse = parse_field(f[7]);
    r.ce_mse_mmse = parse_field(f[8]);
    r.papr_db = parse_field(f[9]);
    r.cpp = parse_field(f[10]);
    rows.push_back(std::move(r));
  }
  return rows;
}

DatasetSplit load_split(const ExperimentConfig& config) {
  DatasetSplit split;
  if (config.data.kind == DatasetKind::synthetic) {
    split.train = synthetic_patches(config.data.seed, config.data.count, config.data.image_size);
    split.validation = synthetic_patches(derive_seed(config.data.seed, Stream::validation),
                                         config.val_count, config.data.image_size);
    return split;
  }
  DatasetSpec spec = config.data;
  spec.count = 0;
  ImageSet all = load_dataset(spec);
  if (all.size() <= config.val_count) {
    throw std::invalid_argument("dataset " + config.data.path.string() + " has " +
                                std::to_string(all.size()) + " patches, need more than val_count = " +
                                std::to_string(config.val_count));
  }
  const std::size_t train_end = all.size() - config.val_count;
  split.validation.assign(all.begin() + static_cast<std::ptrdiff_t>(train_end), all.end());
  all.resize(config.data.count != 0 ? std::min(train_end, config.data.count) : train_end);
  split.train = std::move(all);
  return split;
}

TrainingSetup training_setup(const ExperimentConfig& c) {
  TrainingSetup s;
  s.arch = c.architecture();
  s.channel_paths = c.channel_paths;
  s.channel_decay = c.channel_decay;
  s.snr_db = c.snr_db;
  s.lambda_c = c.lambda_c;
  s.lambda_g = c.lambda_g;
  s.clip_ratio = c.clip_ratio;
  s.epochs = c.epochs;
  s.batch_size = c.batch_size;
  s.adam.learning_rate = c.learning_rate;
  s.seed = c.seed;
  s.val_seed = c.eval_seed;
  return s;
}

EvalSettings eval_settings(const ExperimentConfig& c) {
  EvalSettings s;
  s.channel_paths = c.channel_paths;
  s.channel_decay = c.channel_decay;
  s.snr_db = c.snr_db;
  s.clip_ratio = c.clip_ratio;
  s.repeats = c.eval_repeats;
  s.seed = c.eval_seed;
  return s;
}

MetricsRow make_row(const std::string& experiment, const Architecture& arch,
                    const EvalSettings& settings, const EvalSummary& summary) {
  MetricsRow r;
  r.experiment = experiment;
  r.snr_db = settings.snr_db;
  r.n_s = arch.ofdm.data_symbols;
  r.n_p = arch.ofdm.pilot_symbols;
  r.clip_ratio = settings.clip_ratio;
  r.psnr_db = summary.psnr_db;
  r.ssim = summary.ssim;
  r.ce_mse = summary.ce_mse;
  r.ce_mse_mmse = summary.ce_mse_mmse;
  r.papr_db = summary.papr_db;
  r.cpp = channel_uses_per_pixel(arch);
  return r;
}

std::vector<MetricsRow> sweep_snr(const ModelParams& params, const Architecture& arch,
                                  const ImageSet& images, EvalSettings settings,
                                  const std::vector<double>& snrs, const std::string& experiment) {
  std::vector<MetricsRow> rows;
  for (double snr : snrs) {
    settings.snr_db = snr;
    rows.push_back(make_row(experiment, arch, settings, evaluate(params, arch, images, settings)));
  }
  return rows;
}

std::vector<MetricsRow> sweep_multipath(const ModelParams& params, const Architecture& arch,
                                        const ImageSet& images, EvalSettings settings,
                                        const std::vector<std::size_t>& paths,
                                        const std::string& experiment) {
  std::vector<MetricsRow> rows;
  for (std::size_t l : paths) {
    if (arch.mode != DecoderMode::direct) arch.ofdm.validate(l);
    settings.channel_paths = l;
    rows.push_back(make_row(experiment + "-L" + std::to_string(l), arch, settings,
                            evaluate(params, arch, images, settings)));
  }
  return rows;
}

std::vector<MetricsRow> papr_report(const ModelParams& params, const Architecture& arch,
                                    const ImageSet& images, EvalSettings settings,
                                    const std::vector<double>& ratios, const std::string& experiment) {
  std::vector<MetricsRow> rows;
  for (double rho : ratios) {
    settings.clip_ratio = rho;
    rows.push_back(make_row(experiment, arch, settings, evaluate(params, arch, images, settings)));
  }
  return rows;
}

std::vector<std::pair<std::size_t, std::size_t>> pilot_splits(std::size_t budget,
                                                              std::size_t max_pilots) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t np = 1; np <= max_pilots && np < budget; ++np) out.emplace_back(np, budget - np);
  if (out.empty()) throw std::invalid_argument("pilot budget must be at least 2");
  return out;
}

std::vector<MetricsRow> sweep_pilots(const ExperimentConfig& base, std::size_t budget,
                                     const DatasetSplit& data, std::size_t max_pilots) {
  std::vector<MetricsRow> rows;
  for (auto [np, ns] : pilot_splits(budget, max_pilots)) {
    ExperimentConfig c = base;
    c.ofdm.pilot_symbols = np;
    c.ofdm.data_symbols = ns;
    c.latent_channels = 0;
    c.validate();
    Trainer trainer(training_setup(c), data.train, data.validation);
    trainer.run();
    const EvalSettings settings = eval_settings(c);
    rows.push_back(make_row("sweep-pilots", c.architecture(), settings,
                            evaluate(trainer.params(), c.architecture(), data.validation, settings)));
  }
  return rows;
}

}  // namespace jscc
