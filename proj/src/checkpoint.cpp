#include "tkgt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace tkgt {

namespace {

constexpr char kMagic[8] = {'T', 'K', 'G', 'T', 'C', 'K', 'P', 'T'};

void put_u16(std::string& buf, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_f32(std::string& buf, float v) { put_u32(buf, std::bit_cast<std::uint32_t>(v)); }

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t n, const char* what) {
    if (pos + n > buf.size())
      throw std::runtime_error("checkpoint: " + path + ": truncated while reading " + what);
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= std::uint16_t(std::uint8_t(buf[pos + i])) << (8 * i);
    pos += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

const NamedTensorF32* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  put_u32(buf, ckpt.header.version);
  put_u64(buf, ckpt.header.step);
  put_u64(buf, ckpt.header.epoch);
  put_u64(buf, ckpt.header.seed);
  put_u64(buf, ckpt.header.adam_t);
  put_u32(buf, static_cast<std::uint32_t>(ckpt.header.config_echo.size()));
  buf += ckpt.header.config_echo;
  put_u32(buf, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (t.name.size() > 0xFFFF)
      throw std::runtime_error("checkpoint: tensor name too long: " + t.name);
    put_u16(buf, static_cast<std::uint16_t>(t.name.size()));
    buf += t.name;
    put_u16(buf, static_cast<std::uint16_t>(t.shape.size()));
    std::uint64_t n = 1;
    for (auto d : t.shape) {
      put_u64(buf, d);
      n *= d;
    }
    if (n != t.data.size())
      throw std::runtime_error("checkpoint: tensor " + t.name + " data does not match shape");
    for (float v : t.data) put_f32(buf, v);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot read " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Reader r{buf, 0, path};
  auto magic = r.bytes(sizeof(kMagic), "magic");
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: " + path + ": bad magic, not a checkpoint file");

  Checkpoint ckpt;
  ckpt.header.version = r.u32("version");
  if (ckpt.header.version != 1)
    throw std::runtime_error("checkpoint: " + path + ": unsupported format version " +
                             std::to_string(ckpt.header.version));
  ckpt.header.step = r.u64("step");
  ckpt.header.epoch = r.u64("epoch");
  ckpt.header.seed = r.u64("seed");
  ckpt.header.adam_t = r.u64("adam step");
  auto echo_len = r.u32("config echo length");
  ckpt.header.config_echo = r.bytes(echo_len, "config echo");

  auto n_tensors = r.u32("tensor count");
  ckpt.tensors.reserve(n_tensors);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    NamedTensorF32 t;
    auto name_len = r.u16("tensor name length");
    t.name = r.bytes(name_len, "tensor name");
    auto ndim = r.u16("tensor rank");
    std::uint64_t n = 1;
    for (std::uint16_t d = 0; d < ndim; ++d) {
      t.shape.push_back(r.u64("tensor dims"));
      n *= t.shape.back();
    }
    t.data.resize(n);
    for (std::uint64_t k = 0; k < n; ++k)
      t.data[k] = r.f32(("payload of " + t.name).c_str());
    ckpt.tensors.push_back(std::move(t));
  }
  if (r.pos != buf.size())
    throw std::runtime_error("checkpoint: " + path + ": trailing bytes after tensor directory");
  return ckpt;
}

}  // namespace tkgt
