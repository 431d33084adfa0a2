#pragma once

#include <cstdint>
#include <string>

#include "tkgt/ktp.hpp"
#include "tkgt/tkge.hpp"

namespace tkgt {

enum class Precision { kF32, kF64 };

Precision parse_precision(const std::string& name);
const char* precision_name(Precision p);

struct TrainConfig {
  ModelKind kind = ModelKind::kDe;
  std::size_t dim = 64;
  double gamma = 0.5;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t maxlen = 64;
  double lambda = 0.3;
  std::size_t negatives = 16;
  double lr = 1e-3;
  std::size_t batch = 32;
  std::size_t epochs = 200;
  std::uint64_t seed = 1;
  MaskingStrategy masking = MaskingStrategy::kEitherEOrRPlusW;
  bool mask_time = false;
  double warmup = 0.05;
  double weight_decay = 0.0;
  Precision precision = Precision::kF32;
  double dropout = 0.1;
  double clip_norm = 1.0;
  std::size_t checkpoint_interval = 0;  // epochs between checkpoints; 0 = final only
  bool reciprocals = true;
  std::size_t workers = 1;
  std::size_t eval_every = 0;  // epochs between validation evals; 0 = off
  std::size_t patience = 10;   // non-improving evals before early stop
  std::size_t subword_vocab_size = 2000;

  void validate() const;
};

struct DataPaths {
  std::string train, valid, test;
  std::string aligned, aligned_test;
  std::string out_dir;
};

struct RunConfig {
  TrainConfig train;
  DataPaths data;
};

// `key = value` lines, # comments, unknown keys rejected; relative paths are
// resolved against the config file's directory.
RunConfig load_run_config(const std::string& path);

// Canonical text form of a TrainConfig; stable under parse -> serialize.
std::string serialize_train_config(const TrainConfig& cfg);

struct VocabSizes {
  std::size_t subwords = 0;
  std::size_t entities = 0;
  std::size_t predicates = 0;
  std::size_t timestamps = 0;
};

// The checkpoint config echo: the train config plus vocabulary sizes.
std::string serialize_echo(const TrainConfig& cfg, const VocabSizes& sizes);
void parse_echo(const std::string& text, TrainConfig* cfg, VocabSizes* sizes);

}  // namespace tkgt
