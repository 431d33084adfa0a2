#include "tkgt/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace tkgt {

Precision parse_precision(const std::string& name) {
  if (name == "f32") return Precision::kF32;
  if (name == "f64") return Precision::kF64;
  throw std::runtime_error("unknown precision: " + name + " (expected f32 or f64)");
}

const char* precision_name(Precision p) { return p == Precision::kF32 ? "f32" : "f64"; }

void TrainConfig::validate() const {
  if (dim == 0) throw std::runtime_error("config: dim must be positive");
  if (gamma < 0.0 || gamma > 1.0) throw std::runtime_error("config: gamma must be in [0, 1]");
  if (layers == 0) throw std::runtime_error("config: layers must be positive");
  if (heads == 0 || dim % heads != 0)
    throw std::runtime_error("config: heads must divide dim");
  if (maxlen < 8) throw std::runtime_error("config: maxlen must be at least 8");
  if (lambda < 0.0) throw std::runtime_error("config: lambda must be non-negative");
  if (lr <= 0.0) throw std::runtime_error("config: lr must be positive");
  if (batch == 0) throw std::runtime_error("config: batch must be positive");
  if (warmup < 0.0 || warmup > 1.0) throw std::runtime_error("config: warmup must be in [0, 1]");
  if (weight_decay < 0.0) throw std::runtime_error("config: weight_decay must be non-negative");
  if (dropout < 0.0 || dropout >= 1.0)
    throw std::runtime_error("config: dropout must be in [0, 1)");
  if (clip_norm < 0.0) throw std::runtime_error("config: clip_norm must be non-negative");
  if (workers == 0) throw std::runtime_error("config: workers must be positive");
  if (subword_vocab_size < kNumSpecials + 2)
    throw std::runtime_error("config: subword_vocab_size too small");
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw std::runtime_error("config: key " + key + ": not a number: " + v);
  }
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    auto d = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw std::runtime_error("config: key " + key + ": not a non-negative integer: " + v);
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw std::runtime_error("config: key " + key + ": expected true or false, got " + v);
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

using Setter = std::function<void(const std::string& key, const std::string& value)>;

// One table drives parsing of both config files and checkpoint echoes.
std::map<std::string, Setter> train_setters(TrainConfig& c) {
  return {
      {"kind", [&](const std::string&, const std::string& v) { c.kind = parse_model_kind(v); }},
      {"dim", [&](const std::string& k, const std::string& v) { c.dim = parse_uint(k, v); }},
      {"gamma", [&](const std::string& k, const std::string& v) { c.gamma = parse_double(k, v); }},
      {"layers", [&](const std::string& k, const std::string& v) { c.layers = parse_uint(k, v); }},
      {"heads", [&](const std::string& k, const std::string& v) { c.heads = parse_uint(k, v); }},
      {"maxlen", [&](const std::string& k, const std::string& v) { c.maxlen = parse_uint(k, v); }},
      {"lambda", [&](const std::string& k, const std::string& v) { c.lambda = parse_double(k, v); }},
      {"negatives",
       [&](const std::string& k, const std::string& v) { c.negatives = parse_uint(k, v); }},
      {"lr", [&](const std::string& k, const std::string& v) { c.lr = parse_double(k, v); }},
      {"batch", [&](const std::string& k, const std::string& v) { c.batch = parse_uint(k, v); }},
      {"epochs", [&](const std::string& k, const std::string& v) { c.epochs = parse_uint(k, v); }},
      {"seed", [&](const std::string& k, const std::string& v) { c.seed = parse_uint(k, v); }},
      {"masking",
       [&](const std::string&, const std::string& v) { c.masking = parse_masking_strategy(v); }},
      {"mask_time",
       [&](const std::string& k, const std::string& v) { c.mask_time = parse_bool(k, v); }},
      {"warmup", [&](const std::string& k, const std::string& v) { c.warmup = parse_double(k, v); }},
      {"weight_decay",
       [&](const std::string& k, const std::string& v) { c.weight_decay = parse_double(k, v); }},
      {"precision",
       [&](const std::string&, const std::string& v) { c.precision = parse_precision(v); }},
      {"dropout",
       [&](const std::string& k, const std::string& v) { c.dropout = parse_double(k, v); }},
      {"clip_norm",
       [&](const std::string& k, const std::string& v) { c.clip_norm = parse_double(k, v); }},
      {"checkpoint_interval",
       [&](const std::string& k, const std::string& v) { c.checkpoint_interval = parse_uint(k, v); }},
      {"reciprocals",
       [&](const std::string& k, const std::string& v) { c.reciprocals = parse_bool(k, v); }},
      {"workers", [&](const std::string& k, const std::string& v) { c.workers = parse_uint(k, v); }},
      {"eval_every",
       [&](const std::string& k, const std::string& v) { c.eval_every = parse_uint(k, v); }},
      {"patience",
       [&](const std::string& k, const std::string& v) { c.patience = parse_uint(k, v); }},
      {"subword_vocab_size",
       [&](const std::string& k, const std::string& v) { c.subword_vocab_size = parse_uint(k, v); }},
  };
}

void parse_lines(const std::string& text, const std::map<std::string, Setter>& setters,
                 const std::string& where) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(where + ":" + std::to_string(lineno) +
                               ": expected key = value, got: " + line);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end())
      throw std::runtime_error(where + ":" + std::to_string(lineno) + ": unknown key: " + key);
    it->second(key, value);
  }
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot read " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  RunConfig rc;
  auto dir = std::filesystem::path(path).parent_path();
  auto resolve = [dir](const std::string& p) {
    if (p.empty()) return p;
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (dir / fp).string();
  };

  auto setters = train_setters(rc.train);
  auto path_setter = [&](std::string* slot) {
    return [slot, resolve](const std::string&, const std::string& v) { *slot = resolve(v); };
  };
  setters.emplace("train", path_setter(&rc.data.train));
  setters.emplace("valid", path_setter(&rc.data.valid));
  setters.emplace("test", path_setter(&rc.data.test));
  setters.emplace("aligned", path_setter(&rc.data.aligned));
  setters.emplace("aligned_test", path_setter(&rc.data.aligned_test));
  setters.emplace("out_dir", path_setter(&rc.data.out_dir));

  parse_lines(text, setters, path);
  rc.train.validate();
  return rc;
}

std::string serialize_train_config(const TrainConfig& c) {
  std::ostringstream out;
  out << "kind = " << model_kind_name(c.kind) << '\n'
      << "dim = " << c.dim << '\n'
      << "gamma = " << fmt_double(c.gamma) << '\n'
      << "layers = " << c.layers << '\n'
      << "heads = " << c.heads << '\n'
      << "maxlen = " << c.maxlen << '\n'
      << "lambda = " << fmt_double(c.lambda) << '\n'
      << "negatives = " << c.negatives << '\n'
      << "lr = " << fmt_double(c.lr) << '\n'
      << "batch = " << c.batch << '\n'
      << "epochs = " << c.epochs << '\n'
      << "seed = " << c.seed << '\n'
      << "masking = " << masking_strategy_name(c.masking) << '\n'
      << "mask_time = " << (c.mask_time ? "true" : "false") << '\n'
      << "warmup = " << fmt_double(c.warmup) << '\n'
      << "weight_decay = " << fmt_double(c.weight_decay) << '\n'
      << "precision = " << precision_name(c.precision) << '\n'
      << "dropout = " << fmt_double(c.dropout) << '\n'
      << "clip_norm = " << fmt_double(c.clip_norm) << '\n'
      << "checkpoint_interval = " << c.checkpoint_interval << '\n'
      << "reciprocals = " << (c.reciprocals ? "true" : "false") << '\n'
      << "workers = " << c.workers << '\n'
      << "eval_every = " << c.eval_every << '\n'
      << "patience = " << c.patience << '\n'
      << "subword_vocab_size = " << c.subword_vocab_size << '\n';
  return out.str();
}

std::string serialize_echo(const TrainConfig& cfg, const VocabSizes& sizes) {
  std::ostringstream out;
  out << serialize_train_config(cfg);
  out << "vocab_subwords = " << sizes.subwords << '\n'
      << "vocab_entities = " << sizes.entities << '\n'
      << "vocab_predicates = " << sizes.predicates << '\n'
      << "vocab_timestamps = " << sizes.timestamps << '\n';
  return out.str();
}

void parse_echo(const std::string& text, TrainConfig* cfg, VocabSizes* sizes) {
  auto setters = train_setters(*cfg);
  setters.emplace("vocab_subwords", [sizes](const std::string& k, const std::string& v) {
    sizes->subwords = parse_uint(k, v);
  });
  setters.emplace("vocab_entities", [sizes](const std::string& k, const std::string& v) {
    sizes->entities = parse_uint(k, v);
  });
  setters.emplace("vocab_predicates", [sizes](const std::string& k, const std::string& v) {
    sizes->predicates = parse_uint(k, v);
  });
  setters.emplace("vocab_timestamps", [sizes](const std::string& k, const std::string& v) {
    sizes->timestamps = parse_uint(k, v);
  });
  parse_lines(text, setters, "config echo");
}

}  // namespace tkgt
