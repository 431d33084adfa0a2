#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "tkgt/checkpoint.hpp"
#include "tkgt/config.hpp"
#include "tkgt/evaluator.hpp"
#include "tkgt/ktp.hpp"

namespace tkgt {

// Seed lanes; every random stream is derived from (seed, lane, counter) so
// runs are reproducible and independent of worker scheduling.
constexpr std::uint64_t kLaneInit = 1;
constexpr std::uint64_t kLaneShuffle = 2;
constexpr std::uint64_t kLaneSample = 3;

template <typename T>
struct Adam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<Tensor<T>> m, v;

  void init(const ParamStore<T>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params.tensors) {
      m.push_back(Tensor<T>::zeros(p.shape));
      v.push_back(Tensor<T>::zeros(p.shape));
    }
    t = 0;
  }

  // One update over every parameter; untouched gradients count as zero.
  // A positive clip_norm rescales the whole gradient to that global norm.
  void step(ParamStore<T>& params, const GradStore<T>& grads, double lr, double weight_decay,
            double clip_norm) {
    double scale = 1.0;
    if (clip_norm > 0) {
      double sq = 0;
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (!grads.touched(static_cast<int>(i))) continue;
        for (auto g : grads.g[i].data) sq += double(g) * double(g);
      }
      double norm = std::sqrt(sq);
      if (norm > clip_norm) scale = clip_norm / norm;
    }
    ++t;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& theta = params.tensors[i];
      bool touched = grads.touched(static_cast<int>(i));
      for (std::size_t k = 0; k < theta.numel(); ++k) {
        double g = touched ? double(grads.g[i].data[k]) * scale : 0.0;
        double mi = beta1 * double(m[i].data[k]) + (1.0 - beta1) * g;
        double vi = beta2 * double(v[i].data[k]) + (1.0 - beta2) * g * g;
        m[i].data[k] = static_cast<T>(mi);
        v[i].data[k] = static_cast<T>(vi);
        double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps);
        if (weight_decay > 0) update += lr * weight_decay * double(theta.data[k]);
        theta.data[k] = static_cast<T>(double(theta.data[k]) - update);
      }
    }
  }
};

struct MetricRow {
  std::uint64_t step = 0;
  double loss_total = 0, loss_tke = 0, loss_ktp = 0, lr = 0;
};

struct TrainOutcome {
  bool aborted_nan = false;
  bool early_stopped = false;
  bool reached_target = false;
  std::uint64_t steps = 0;
  std::uint64_t epochs = 0;
  double best_eval_mrr = -1.0;
  std::vector<MetricRow> log;
};

// Periodic evaluation during training: early stopping on a validation split
// and/or a stop-at-target rule for fixed-budget runs.
struct StopRule {
  const std::vector<Quadruple>* quads = nullptr;
  const QuadSet* filter = nullptr;
  std::size_t every = 0;     // epochs between evaluations; 0 = off
  std::size_t patience = 0;  // non-improving evaluations tolerated; 0 = off
  double target_mrr = -1.0;  // stop once filtered MRR reaches this; <0 = off
};

// Joint or embedding-only training over one shared parameter registry.
template <typename T>
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const Vocabulary& vocab, bool joint)
      : cfg_(cfg), vocab_(&vocab), joint_(joint) {
    cfg_.validate();
    if (cfg_.reciprocals && !vocab.has_reciprocals)
      throw std::runtime_error("trainer: reciprocals enabled but vocabulary not augmented");
    Rng init_rng(derive_seed(cfg_.seed, kLaneInit));
    tkge_.kind = cfg_.kind;
    tkge_.dims = {vocab.n_entities(), vocab.n_predicates(), vocab.n_timestamps(), cfg_.dim,
                  cfg_.gamma};
    tkge_.allocate(store_, init_rng);
    if (joint_) {
      enc_.dims = {cfg_.dim,          cfg_.layers, cfg_.heads,
                   cfg_.maxlen,       vocab.n_subwords(), vocab.n_timestamps()};
      enc_.allocate(store_, init_rng);
    }
    adam_.init(store_);
  }

  const TrainConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return store_; }
  const ParamStore<T>& params() const { return store_; }
  const TkgeModel<T>& tkge() const { return tkge_; }
  const EncoderModel<T>& encoder() const {
    if (!joint_) throw std::runtime_error("trainer: no encoder in embedding-only mode");
    return enc_;
  }
  bool joint() const { return joint_; }
  std::uint64_t steps_done() const { return step_done_; }
  std::uint64_t epochs_done() const { return epoch_done_; }

  VocabSizes vocab_sizes() const {
    return {vocab_->n_subwords(), vocab_->n_entities(), vocab_->n_predicates(),
            vocab_->n_timestamps()};
  }
  std::string echo() const { return serialize_echo(cfg_, vocab_sizes()); }

  // Joint mode trains over aligned samples; embedding-only mode over the
  // quadruple list (pass the reciprocal-augmented list when enabled).
  TrainOutcome train(const std::vector<AlignedSample>& aligned,
                     const std::vector<Quadruple>& quads, const std::string& out_dir,
                     const StopRule& stop = {}) {
    const std::size_t n = joint_ ? aligned.size() : quads.size();
    if (n == 0) throw std::runtime_error("trainer: empty training set");

    SpaceSizes sizes{vocab_->n_subwords(), vocab_->n_entities(), vocab_->n_predicates(),
                     vocab_->n_timestamps()};
    JointConfig jc;
    jc.lambda = cfg_.lambda;
    jc.negatives = cfg_.negatives;
    jc.masking = {cfg_.masking, cfg_.mask_time, 0.15};
    jc.dropout = cfg_.precision == Precision::kF64 ? 0.0 : cfg_.dropout;
    jc.reciprocals = cfg_.reciprocals;

    const std::size_t steps_per_epoch = (n + cfg_.batch - 1) / cfg_.batch;
    const std::size_t total_steps = steps_per_epoch * cfg_.epochs;
    const std::size_t warmup_steps =
        static_cast<std::size_t>(std::ceil(cfg_.warmup * static_cast<double>(total_steps)));

    TrainOutcome out;
    out.best_eval_mrr = best_eval_mrr_;
    std::ofstream csv;
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      bool fresh = step_done_ == 0;
      csv.open(out_dir + "/metrics.csv", fresh ? std::ios::trunc : std::ios::app);
      if (!csv) throw std::runtime_error("trainer: cannot write metrics to " + out_dir);
      if (fresh) csv << "step,loss_total,loss_tke,loss_ktp,lr\n";
    }

    std::size_t bad_evals = 0;
    for (std::uint64_t epoch = epoch_done_; epoch < cfg_.epochs; ++epoch) {
      std::vector<std::size_t> order(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      Rng shuffle_rng(derive_seed(cfg_.seed, kLaneShuffle, epoch));
      shuffle_rng.shuffle(order);

      for (std::size_t start = 0; start < n; start += cfg_.batch) {
        std::size_t end = std::min(n, start + cfg_.batch);
        std::vector<SamplePlan> plans;
        plans.reserve(end - start);
        std::uint64_t epoch_seed = derive_seed(cfg_.seed, kLaneSample, epoch);
        for (std::size_t k = start; k < end; ++k) {
          std::size_t idx = order[k];
          std::uint64_t sample_seed = derive_seed(epoch_seed, idx);
          if (joint_) {
            plans.push_back(plan_sample(aligned[idx], jc, sizes, tkge_.dims.n_entities,
                                        cfg_.maxlen, vocab_, sample_seed));
          } else {
            SamplePlan p;
            p.positives = {quads[idx]};
            if (jc.negatives > 0) {
              Rng neg_rng(derive_seed(sample_seed, 2));
              p.negatives = negative_sample(quads[idx], jc.negatives, tkge_.dims.n_entities,
                                            neg_rng);
            }
            p.dropout_seed = derive_seed(sample_seed, 3);
            plans.push_back(std::move(p));
          }
        }

        GradStore<T> grads(store_.size());
        auto stats = joint_batch<T>(tkge_, enc_, store_, plans, jc.lambda, jc.dropout, &grads,
                                    static_cast<int>(cfg_.workers));
        if (!std::isfinite(stats.loss_total)) {
          out.aborted_nan = true;
          out.steps = step_done_;
          out.epochs = epoch_done_;
          return out;  // last periodic checkpoint stays the newest good state
        }
        double lr_t = cfg_.lr;
        if (warmup_steps > 0 && step_done_ + 1 < warmup_steps)
          lr_t = cfg_.lr * static_cast<double>(step_done_ + 1) / static_cast<double>(warmup_steps);
        adam_.step(store_, grads, lr_t, cfg_.weight_decay, cfg_.clip_norm);
        ++step_done_;

        MetricRow row{step_done_, stats.loss_total, stats.loss_tke, stats.loss_ktp, lr_t};
        out.log.push_back(row);
        if (csv.is_open())
          csv << row.step << ',' << row.loss_total << ',' << row.loss_tke << ',' << row.loss_ktp
              << ',' << row.lr << '\n';
      }
      epoch_done_ = epoch + 1;

      if (!out_dir.empty() && cfg_.checkpoint_interval > 0 &&
          epoch_done_ % cfg_.checkpoint_interval == 0)
        save_checkpoint(out_dir + "/checkpoint_epoch" + std::to_string(epoch_done_) + ".ckpt",
                        make_checkpoint());

      if (stop.every > 0 && stop.quads && !stop.quads->empty() &&
          epoch_done_ % stop.every == 0) {
        QuadSet empty;
        auto res = evaluate(tkge_, store_, *stop.quads, stop.filter ? *stop.filter : empty);
        double mrr = res.filtered.mrr;
        if (mrr > best_eval_mrr_) {
          best_eval_mrr_ = mrr;
          bad_evals = 0;
        } else {
          ++bad_evals;
        }
        out.best_eval_mrr = best_eval_mrr_;
        if (stop.target_mrr >= 0 && mrr >= stop.target_mrr) {
          out.reached_target = true;
          break;
        }
        if (stop.patience > 0 && bad_evals >= stop.patience) {
          out.early_stopped = true;
          break;
        }
      }
    }

    out.steps = step_done_;
    out.epochs = epoch_done_;
    if (!out_dir.empty()) save_checkpoint(out_dir + "/checkpoint.ckpt", make_checkpoint());
    return out;
  }

  Checkpoint make_checkpoint() const {
    Checkpoint ckpt;
    ckpt.header.version = 1;
    ckpt.header.config_echo = echo();
    ckpt.header.step = step_done_;
    ckpt.header.epoch = epoch_done_;
    ckpt.header.seed = cfg_.seed;
    ckpt.header.adam_t = adam_.t;
    auto push = [&ckpt](const std::string& name, const Tensor<T>& t) {
      NamedTensorF32 nt;
      nt.name = name;
      nt.shape.assign(t.shape.begin(), t.shape.end());
      nt.data.reserve(t.numel());
      for (auto x : t.data) nt.data.push_back(static_cast<float>(x));
      ckpt.tensors.push_back(std::move(nt));
    };
    for (std::size_t i = 0; i < store_.size(); ++i) push(store_.names[i], store_.tensors[i]);
    for (std::size_t i = 0; i < store_.size(); ++i) {
      push("adam.m." + store_.names[i], adam_.m[i]);
      push("adam.v." + store_.names[i], adam_.v[i]);
    }
    return ckpt;
  }

  // Resume from a checkpoint produced by an identically configured trainer.
  void restore(const Checkpoint& ckpt) {
    if (ckpt.header.config_echo != echo())
      throw std::runtime_error(
          "checkpoint: configuration mismatch; the checkpoint was produced by a different "
          "config or dataset");
    auto load_into = [&](const std::string& name, Tensor<T>& dst) {
      const auto* src = ckpt.find(name);
      if (!src) throw std::runtime_error("checkpoint: missing tensor " + name);
      std::vector<std::size_t> shape(src->shape.begin(), src->shape.end());
      if (shape != dst.shape)
        throw std::runtime_error("checkpoint: tensor " + name + " has shape " +
                                 Tensor<float>(shape).shape_str() + ", expected " +
                                 dst.shape_str());
      for (std::size_t k = 0; k < dst.numel(); ++k) dst.data[k] = static_cast<T>(src->data[k]);
    };
    for (const auto& t : ckpt.tensors) {
      std::string base = t.name;
      if (base.rfind("adam.m.", 0) == 0) base = base.substr(7);
      else if (base.rfind("adam.v.", 0) == 0) base = base.substr(7);
      if (store_.find(base) < 0)
        throw std::runtime_error("checkpoint: unknown tensor name " + t.name);
    }
    for (std::size_t i = 0; i < store_.size(); ++i) {
      load_into(store_.names[i], store_.tensors[i]);
      load_into("adam.m." + store_.names[i], adam_.m[i]);
      load_into("adam.v." + store_.names[i], adam_.v[i]);
    }
    step_done_ = ckpt.header.step;
    epoch_done_ = ckpt.header.epoch;
    adam_.t = ckpt.header.adam_t;
  }

 private:
  TrainConfig cfg_;
  const Vocabulary* vocab_;
  bool joint_;
  ParamStore<T> store_;
  TkgeModel<T> tkge_;
  EncoderModel<T> enc_;
  Adam<T> adam_;
  std::uint64_t epoch_done_ = 0;
  std::uint64_t step_done_ = 0;
  double best_eval_mrr_ = -1.0;
};

// Reconstructs a trained model from a checkpoint for evaluation. Adam state
// is ignored; the parameter registry must match the echo exactly.
template <typename T>
struct RestoredRun {
  TrainConfig cfg;
  VocabSizes sizes;
  ParamStore<T> store;
  TkgeModel<T> tkge;
  EncoderModel<T> enc;
  bool has_encoder = false;
};

template <typename T>
RestoredRun<T> restore_run(const Checkpoint& ckpt) {
  RestoredRun<T> run;
  parse_echo(ckpt.header.config_echo, &run.cfg, &run.sizes);
  run.cfg.validate();
  if (run.sizes.entities == 0 || run.sizes.predicates == 0 || run.sizes.timestamps == 0)
    throw std::runtime_error("checkpoint: corrupt header, vocabulary sizes missing");

  Rng init_rng(derive_seed(run.cfg.seed, kLaneInit));
  run.tkge.kind = run.cfg.kind;
  run.tkge.dims = {run.sizes.entities, run.sizes.predicates, run.sizes.timestamps, run.cfg.dim,
                   run.cfg.gamma};
  run.tkge.allocate(run.store, init_rng);
  run.has_encoder = ckpt.find("enc.subword_table") != nullptr;
  if (run.has_encoder) {
    run.enc.dims = {run.cfg.dim,    run.cfg.layers,      run.cfg.heads,
                    run.cfg.maxlen, run.sizes.subwords,  run.sizes.timestamps};
    run.enc.allocate(run.store, init_rng);
  }
  for (std::size_t i = 0; i < run.store.size(); ++i) {
    const auto* src = ckpt.find(run.store.names[i]);
    if (!src) throw std::runtime_error("checkpoint: missing tensor " + run.store.names[i]);
    std::vector<std::size_t> shape(src->shape.begin(), src->shape.end());
    if (shape != run.store.tensors[i].shape)
      throw std::runtime_error("checkpoint: tensor " + run.store.names[i] + " has shape " +
                               Tensor<float>(shape).shape_str() + ", expected " +
                               run.store.tensors[i].shape_str());
    for (std::size_t k = 0; k < src->data.size(); ++k)
      run.store.tensors[i].data[k] = static_cast<T>(src->data[k]);
  }
  return run;
}

}  // namespace tkgt
