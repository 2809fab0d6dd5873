#include "jscc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace jscc {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw std::runtime_error("checkpoint: truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return v;
}

std::uint32_t narrow(std::size_t n, const char* what) {
  if (n > 0xffffffffu) throw std::length_error(std::string("checkpoint: ") + what + " too large");
  return static_cast<std::uint32_t>(n);
}

}  // namespace

void write_checkpoint(std::ostream& out, const ModelParams& params) {
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, narrow(params.blocks().size(), "block count"));
  for (const ParamBlock& b : params.blocks()) {
    put_u32(out, narrow(b.name.size(), "name"));
    out.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    put_u32(out, narrow(b.value.shape().size(), "rank"));
    for (std::size_t e : b.value.shape()) put_u32(out, narrow(e, "extent"));
    for (double v : b.value.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

ModelParams read_checkpoint(std::istream& in) {
  char magic[sizeof kCheckpointMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  const std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  ModelParams params;
  const std::uint32_t count = get_u32(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(get_u32(in), '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name.size()))) {
      throw std::runtime_error("checkpoint: truncated name");
    }
    Shape shape(get_u32(in));
    for (auto& e : shape) e = get_u32(in);
    RealGrid value(shape);
    for (double& v : value.values()) v = static_cast<double>(std::bit_cast<float>(get_u32(in)));
    params.add(std::move(name), std::move(value));
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
  write_checkpoint(out, params);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  try {
    return read_checkpoint(in);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(std::string(e.what()) + " in " + path.string());
  }
}

}  // namespace jscc
