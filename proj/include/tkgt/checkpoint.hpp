#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tkgt {

// Versioned binary checkpoint: header, named tensor directory, little-endian
// 32-bit payloads. The RNG "state" is the (seed, epoch, step) counter triple;
// every random stream in training is derived from those.
struct CheckpointHeader {
  std::uint32_t version = 1;
  std::string config_echo;  // canonical key=value text, includes vocab sizes
  std::uint64_t step = 0;   // completed optimizer steps
  std::uint64_t epoch = 0;  // completed epochs
  std::uint64_t seed = 0;
  std::uint64_t adam_t = 0;
};

struct NamedTensorF32 {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<float> data;
};

struct Checkpoint {
  CheckpointHeader header;
  std::vector<NamedTensorF32> tensors;  // canonical (registration) order

  const NamedTensorF32* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tkgt
