// Command-line driver: training, evaluation, sweeps and oracle checks.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "jscc/checkpoint.hpp"
#include "jscc/config.hpp"
#include "jscc/experiments.hpp"
#include "jscc/gradient_suite.hpp"
#include "jscc/precoding.hpp"
#include "jscc/train.hpp"

namespace fs = std::filesystem;
using namespace jscc;

namespace {

ExperimentConfig resolve_config(const std::string& path) {
  ExperimentConfig c = path.empty() ? ExperimentConfig{} : load_config(path);
  apply_environment(c);
  c.validate();
  return c;
}

ModelParams load_model(const ExperimentConfig& c, const std::string& checkpoint) {
  if (checkpoint.empty()) return build_model(c.architecture(), c.seed, c.lambda_g > 0.0);
  fs::path p = checkpoint;
  if (fs::is_directory(p)) p /= "model.ckpt";
  return load_checkpoint(p);
}

// Writes rows to <output>/<name>.csv and echoes them to stdout.
void emit(const ExperimentConfig& c, const std::string& name, const std::vector<MetricsRow>& rows) {
  fs::create_directories(c.output_dir);
  std::ofstream file(c.output_dir / (name + ".csv"));
  CsvWriter to_file(file);
  CsvWriter to_stdout(std::cout);
  for (const auto& r : rows) {
    to_file.write(r);
    to_stdout.write(r);
  }
  if (!file) throw std::runtime_error("cannot write " + (c.output_dir / (name + ".csv")).string());
}

int cmd_train(const std::string& config_path, bool resume) {
  const ExperimentConfig c = resolve_config(config_path);
  fs::create_directories(c.output_dir);
  {
    std::ofstream echo(c.output_dir / "config.ini");
    echo << serialize(c);
  }
  const DatasetSplit data = load_split(c);
  Trainer trainer(training_setup(c), data.train, data.validation);
  const fs::path ckpt = c.output_dir / "checkpoint";
  if (resume) trainer.restore(ckpt);

  std::ofstream log(c.output_dir / "train_log.csv");
  log << kTrainLogHeader << '\n';
  std::cout << kTrainLogHeader << '\n';
  for (const auto& r : trainer.history()) {
    log << format_epoch(r) << '\n';
    std::cout << format_epoch(r) << '\n';
  }
  trainer.run([&](const EpochRecord& r) {
    log << format_epoch(r) << '\n' << std::flush;
    std::cout << format_epoch(r) << std::endl;
    trainer.save(ckpt);
  });
  trainer.save(ckpt);

  const EvalSettings settings = eval_settings(c);
  const auto summary = evaluate(trainer.params(), c.architecture(), data.validation, settings);
  emit(c, "metrics", {make_row("train", c.architecture(), settings, summary)});
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint) {
  const ExperimentConfig c = resolve_config(config_path);
  const ModelParams params = load_model(c, checkpoint);
  const DatasetSplit data = load_split(c);
  const EvalSettings settings = eval_settings(c);
  const auto summary = evaluate(params, c.architecture(), data.validation, settings);
  emit(c, "eval", {make_row("eval", c.architecture(), settings, summary)});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep joint source-channel coding over OFDM: training, evaluation and sweeps"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  std::string config, checkpoint;
  bool resume = false;
  auto* train = app.add_subcommand("train", "Train a model and write checkpoints and logs");
  train->add_option("-c,--config", config, "Experiment config file")->check(CLI::ExistingFile);
  train->add_flag("--resume", resume, "Continue from <output>/checkpoint");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the validation set");
  std::vector<double> snrs{0, 5, 10, 15, 20};
  std::vector<std::size_t> paths{2, 4, 8, 12, 16};
  std::vector<double> ratios{0.8, 1.0, 1.2, 1.4, kNoClipping};
  std::size_t budget = 7;
  auto* sweep_snr_cmd = app.add_subcommand("sweep-snr", "Evaluate a checkpoint over test SNRs");
  sweep_snr_cmd->add_option("--snrs", snrs, "Test SNRs in dB")->delimiter(',');
  auto* sweep_mp = app.add_subcommand("sweep-multipath", "Evaluate over channel path counts");
  sweep_mp->add_option("--paths", paths, "Path counts L")->delimiter(',');
  auto* sweep_pilots_cmd =
      app.add_subcommand("sweep-pilots", "Train and evaluate one model per (N_p, N_s) split");
  sweep_pilots_cmd->add_option("--budget", budget, "N_p + N_s");
  auto* papr = app.add_subcommand("papr-report", "Mean PAPR and PSNR versus clipping ratio");
  papr->add_option("--ratios", ratios, "Clipping ratios, inf for none")->delimiter(',');
  for (auto* sub : {eval, sweep_snr_cmd, sweep_mp, sweep_pilots_cmd, papr}) {
    sub->add_option("-c,--config", config, "Experiment config file")->check(CLI::ExistingFile);
  }
  for (auto* sub : {eval, sweep_snr_cmd, sweep_mp, papr}) {
    sub->add_option("--checkpoint", checkpoint,
                    "Model checkpoint file or directory (default: freshly initialized model)");
  }

  std::vector<double> gains;
  double noise = 0.1, power = 1.0;
  auto* wf = app.add_subcommand("waterfill", "Print water-filling power allocations");
  wf->add_option("--gains", gains, "Subcarrier gains |H_k|^2")->delimiter(',')->required();
  wf->add_option("--noise", noise, "Noise variance");
  wf->add_option("--power", power, "Total power");

  std::size_t seeds = 5;
  auto* gc = app.add_subcommand("gradcheck", "Run the finite-difference gradient oracle suite");
  gc->add_option("--seeds", seeds, "Seeds per op");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(config, resume);
    if (*eval) return cmd_eval(config, checkpoint);
    if (*sweep_snr_cmd || *sweep_mp || *papr) {
      const ExperimentConfig c = resolve_config(config);
      const ModelParams params = load_model(c, checkpoint);
      const DatasetSplit data = load_split(c);
      const EvalSettings settings = eval_settings(c);
      if (*sweep_snr_cmd) {
        emit(c, "sweep_snr", sweep_snr(params, c.architecture(), data.validation, settings, snrs));
      } else if (*sweep_mp) {
        emit(c, "sweep_multipath",
             sweep_multipath(params, c.architecture(), data.validation, settings, paths));
      } else {
        emit(c, "papr_report", papr_report(params, c.architecture(), data.validation, settings, ratios));
      }
      return 0;
    }
    if (*sweep_pilots_cmd) {
      const ExperimentConfig c = resolve_config(config);
      emit(c, "sweep_pilots", sweep_pilots(c, budget, load_split(c)));
      return 0;
    }
    if (*wf) {
      const auto p = waterfill(gains, noise, power);
      std::printf("subcarrier,gain,power\n");
      for (std::size_t k = 0; k < p.size(); ++k) {
        std::printf("%zu,%s,%s\n", k, format_double(gains[k]).c_str(), format_double(p[k]).c_str());
      }
      std::printf("# water level %s\n", format_double(water_level(gains, noise, power)).c_str());
      return 0;
    }
    if (*gc) {
      const auto start = std::chrono::steady_clock::now();
      bool ok = true;
      std::printf("op,seed,max_relative_error,coordinates,status\n");
      for (const auto& r : run_gradient_suite(seeds)) {
        ok = ok && r.passed();
        std::printf("%s,%llu,%.3e,%zu,%s\n", r.op.c_str(), static_cast<unsigned long long>(r.seed),
                    r.max_relative_error, r.coordinates, r.passed() ? "pass" : "FAIL");
      }
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::printf("# %s in %.2f s\n", ok ? "all passed" : "FAILURES", secs);
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
