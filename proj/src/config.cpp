#include "jscc/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace jscc {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t parse_size(const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument("expected an unsigned integer");
  return out;
}

double parse_double(const std::string& v) {
  if (v == "inf" || v == "none") return kNoClipping;
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument("expected a number");
  return out;
}

// One table drives parsing and serialization so both stay in sync.
struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename T>
Field size_field(std::string section, std::string key, T ExperimentConfig::*member) {
  return {std::move(section), std::move(key),
          [member](const ExperimentConfig& c) { return std::to_string(c.*member); },
          [member](ExperimentConfig& c, const std::string& v) {
            c.*member = static_cast<T>(parse_size(v));
          }};
}

Field double_field(std::string section, std::string key, double ExperimentConfig::*member) {
  return {std::move(section), std::move(key),
          [member](const ExperimentConfig& c) { return format_double(c.*member); },
          [member](ExperimentConfig& c, const std::string& v) { c.*member = parse_double(v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    auto ofdm = [](std::size_t OfdmConfig::*m) {
      return std::pair{[m](const ExperimentConfig& c) { return std::to_string(c.ofdm.*m); },
                       [m](ExperimentConfig& c, const std::string& v) { c.ofdm.*m = parse_size(v); }};
    };
    for (auto [key, member] : {std::pair{"fft_size", &OfdmConfig::fft_size},
                               std::pair{"cp_length", &OfdmConfig::cp_length},
                               std::pair{"pilot_symbols", &OfdmConfig::pilot_symbols},
                               std::pair{"data_symbols", &OfdmConfig::data_symbols}}) {
      auto [get, set] = ofdm(member);
      f.push_back({"ofdm", key, get, set});
    }
    f.push_back(size_field("channel", "paths", &ExperimentConfig::channel_paths));
    f.push_back(double_field("channel", "decay", &ExperimentConfig::channel_decay));
    f.push_back(double_field("channel", "snr_db", &ExperimentConfig::snr_db));

    f.push_back({"model", "mode", [](const ExperimentConfig& c) { return to_string(c.mode); },
                 [](ExperimentConfig& c, const std::string& v) { c.mode = parse_decoder_mode(v); }});
    f.push_back(size_field("model", "channels", &ExperimentConfig::latent_channels));
    f.push_back(size_field("model", "downsample", &ExperimentConfig::downsample));
    f.push_back(size_field("model", "width", &ExperimentConfig::width));
    f.push_back(size_field("model", "res_blocks", &ExperimentConfig::res_blocks));
    f.push_back(size_field("model", "subnet_width", &ExperimentConfig::subnet_width));
    f.push_back(size_field("model", "disc_width", &ExperimentConfig::disc_width));
    f.push_back(double_field("model", "lambda_c", &ExperimentConfig::lambda_c));
    f.push_back(double_field("model", "lambda_g", &ExperimentConfig::lambda_g));
    f.push_back(double_field("model", "clip_ratio", &ExperimentConfig::clip_ratio));

    f.push_back(size_field("train", "epochs", &ExperimentConfig::epochs));
    f.push_back(size_field("train", "batch_size", &ExperimentConfig::batch_size));
    f.push_back(double_field("train", "learning_rate", &ExperimentConfig::learning_rate));
    f.push_back(size_field("train", "seed", &ExperimentConfig::seed));

    f.push_back({"data", "kind", [](const ExperimentConfig& c) { return to_string(c.data.kind); },
                 [](ExperimentConfig& c, const std::string& v) { c.data.kind = parse_dataset_kind(v); }});
    f.push_back({"data", "path", [](const ExperimentConfig& c) { return c.data.path.string(); },
                 [](ExperimentConfig& c, const std::string& v) { c.data.path = v; }});
    f.push_back({"data", "count", [](const ExperimentConfig& c) { return std::to_string(c.data.count); },
                 [](ExperimentConfig& c, const std::string& v) { c.data.count = parse_size(v); }});
    f.push_back(size_field("data", "val_count", &ExperimentConfig::val_count));
    f.push_back({"data", "image_size",
                 [](const ExperimentConfig& c) { return std::to_string(c.data.image_size); },
                 [](ExperimentConfig& c, const std::string& v) { c.data.image_size = parse_size(v); }});
    f.push_back({"data", "seed", [](const ExperimentConfig& c) { return std::to_string(c.data.seed); },
                 [](ExperimentConfig& c, const std::string& v) { c.data.seed = parse_size(v); }});

    f.push_back(size_field("eval", "repeats", &ExperimentConfig::eval_repeats));
    f.push_back(size_field("eval", "seed", &ExperimentConfig::eval_seed));

    f.push_back({"output", "dir", [](const ExperimentConfig& c) { return c.output_dir.string(); },
                 [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; }});
    return f;
  }();
  return table;
}

}  // namespace

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

Architecture ExperimentConfig::architecture() const {
  Architecture a;
  a.image_size = data.image_size;
  a.downsample = downsample;
  a.width = width;
  a.res_blocks = res_blocks;
  a.subnet_width = subnet_width;
  a.disc_width = disc_width;
  a.mode = mode;
  a.ofdm = ofdm;
  return a;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw std::invalid_argument("config " + key + ": " + why);
  };
  if (channel_paths == 0) fail("channel.paths", "must be at least 1");
  if (channel_paths > ofdm.cp_length + 1) {
    fail("ofdm.cp_length", std::to_string(ofdm.cp_length) + " samples cannot absorb channel.paths = " +
                               std::to_string(channel_paths));
  }
  try {
    ofdm.validate(channel_paths);
  } catch (const std::invalid_argument& e) {
    fail("[ofdm]/[channel]", e.what());
  }
  if (!(channel_decay > 0.0)) fail("channel.decay", "must be positive");
  if (!std::isfinite(snr_db)) fail("channel.snr_db", "must be finite");
  if (!(lambda_c >= 0.0)) fail("model.lambda_c", "must be non-negative");
  if (!(lambda_g >= 0.0)) fail("model.lambda_g", "must be non-negative");
  if (!(clip_ratio > 0.0)) fail("model.clip_ratio", "must be positive or inf");
  if (epochs == 0) fail("train.epochs", "must be positive");
  if (batch_size == 0) fail("train.batch_size", "must be positive");
  if (!(learning_rate > 0.0)) fail("train.learning_rate", "must be positive");
  if (eval_repeats == 0) fail("eval.repeats", "must be positive");
  const Architecture arch = architecture();
  try {
    arch.validate();
  } catch (const std::invalid_argument& e) {
    fail("[model]", e.what());
  }
  if (latent_channels != 0 && latent_channels != arch.latent_channels()) {
    fail("model.channels", std::to_string(latent_channels) + " disagrees with the " +
                               std::to_string(arch.latent_channels()) +
                               " channels implied by the OFDM layout");
  }
  if (data.kind != DatasetKind::synthetic && !std::filesystem::exists(data.path)) {
    fail("data.path", "'" + data.path.string() + "' does not exist");
  }
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  std::map<std::string, const Field*> lookup;
  for (const Field& f : fields()) lookup[f.section + "." + f.key] = &f;

  std::istringstream in{std::string(text)};
  std::string raw, section;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    auto fail = [&](const std::string& why) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + why);
    };
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      const bool known = std::any_of(lookup.begin(), lookup.end(), [&](const auto& kv) {
        return kv.second->section == section;
      });
      if (!known) fail("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    auto it = lookup.find(section + "." + key);
    if (it == lookup.end()) fail("unknown key '" + key + "' in section [" + section + "]");
    try {
      it->second->set(c, value);
    } catch (const std::exception& e) {
      fail(key + " = '" + value + "': " + e.what());
    }
  }
  return c;
}

std::string serialize(const ExperimentConfig& c) {
  std::string out, section;
  for (const Field& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(c) + "\n";
  }
  return out;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

void apply_environment(ExperimentConfig& config) {
  if (const char* dir = std::getenv("JSCC_OUTPUT_DIR"); dir != nullptr && *dir != '\0') {
    config.output_dir = dir;
  }
}

}  // namespace jscc
