#pragma once

#include <string>
#include <thread>
#include <vector>

#include "tkgt/encoder.hpp"

namespace tkgt {

// Masking strategies over the packed sequence:
//  - kJointErw: each of {e_s, p, e_o} independently with prob `rate`, plus
//    each subword with prob `rate` (knowledge tokens may co-mask).
//  - kEitherEOrRPlusW (default): exactly one knowledge token, uniform over
//    {e_s, p, e_o}, plus each subword with prob `rate`; an entity and the
//    predicate are never masked together.
//  - kOneOfErw: per sample choose uniformly one of subwords-only /
//    one-entity-only / predicate-only.
// With mask_time, the timestamp token is additionally masked with prob
// `rate` under the same replacement rule.
enum class MaskingStrategy { kJointErw, kEitherEOrRPlusW, kOneOfErw };

MaskingStrategy parse_masking_strategy(const std::string& name);
const char* masking_strategy_name(MaskingStrategy s);

struct MaskingConfig {
  MaskingStrategy strategy = MaskingStrategy::kEitherEOrRPlusW;
  bool mask_time = false;
  double rate = 0.15;
};

struct SpaceSizes {
  std::size_t subwords = 0;
  std::size_t entities = 0;
  std::size_t predicates = 0;
  std::size_t timestamps = 0;
};

struct MaskLabel {
  std::size_t position = 0;
  int space = kTypeSubword;  // TokenType of the masked slot
  int original_id = -1;
  Replacement repl = Replacement::kNone;
};

struct MaskedSample {
  BuiltInput input;
  std::vector<MaskLabel> labels;
};

// Applies a masking strategy; pure given (input, config, sizes, rng state).
// Every masked position gets [MASK] w.p. 0.8, a random same-space id
// (excluding the original and special tokens) w.p. 0.1, and stays unchanged
// w.p. 0.1.
MaskedSample mask_sample(const BuiltInput& input, const MaskingConfig& cfg,
                         const SpaceSizes& sizes, Rng& rng);

// All randomness of one training sample, assembled up front so that tape
// execution is pure and parallel-safe.
struct SamplePlan {
  MaskedSample masked;
  std::vector<Quadruple> positives;   // quad (+ reciprocal twin when enabled)
  std::vector<Quadruple> negatives;   // m per positive, flattened in order
  std::uint64_t dropout_seed = 0;
};

struct JointConfig {
  double lambda = 0.3;
  std::size_t negatives = 16;
  MaskingConfig masking;
  double dropout = 0.0;
  bool reciprocals = false;  // train the reciprocal twin in the tKE term
};

SamplePlan plan_sample(const AlignedSample& sample, const JointConfig& jc,
                       const SpaceSizes& sizes, std::size_t n_entities, std::size_t maxlen,
                       const Vocabulary* vocab_for_reciprocal, std::uint64_t seed);

// Knowledge-text prediction sum for one sample: the sum of per-position head
// cross entropies (count reported separately; the batch mean divides once).
template <typename T>
struct KtpSum {
  typename Tape<T>::Id node = -1;
  std::size_t count = 0;
};

template <typename T>
KtpSum<T> ktp_sum_tape(Tape<T>& tape, LeafCache<T>& leaf, const TkgeModel<T>& tkge,
                       const EncoderModel<T>& enc, const MaskedSample& masked,
                       double dropout_p = 0.0, Rng* drop_rng = nullptr) {
  KtpSum<T> out;
  out.count = masked.labels.size();
  if (out.count == 0) return out;
  auto x = enc.embed_input_tape(tape, leaf, tkge, masked.input);
  auto seq = masked.input.sequence();
  auto states = enc.encode_tape(tape, leaf, x, seq.attention, dropout_p, drop_rng);
  for (const auto& label : masked.labels) {
    auto logits =
        enc.head_logits_tape(tape, leaf, tkge, states, masked.input, label.position, label.space);
    auto ce = tape.softmax_xent(logits, static_cast<std::size_t>(label.original_id));
    out.node = out.node < 0 ? ce : tape.add(out.node, ce);
  }
  return out;
}

// Joint loss over a batch of plans on one tape:
//   L = mean BCE over (positives + negatives)  +  lambda * mean CE over
//   masked positions.
// Used by gradient checks; the trainer evaluates the same arithmetic with
// per-sample tapes (see joint_batch).
template <typename T>
typename Tape<T>::Id joint_loss_tape(Tape<T>& tape, LeafCache<T>& leaf, const TkgeModel<T>& tkge,
                                     const EncoderModel<T>& enc,
                                     const std::vector<SamplePlan>& plans, double lambda,
                                     double dropout_p = 0.0) {
  if (plans.empty()) throw std::runtime_error("joint loss: empty batch");
  std::size_t tke_terms = 0, masked_total = 0;
  for (const auto& p : plans) {
    tke_terms += p.positives.size() + p.negatives.size();
    masked_total += p.masked.labels.size();
  }
  typename Tape<T>::Id bce = -1, ktp = -1;
  for (const auto& p : plans) {
    std::vector<Quadruple> quads = p.positives;
    std::vector<char> labels(p.positives.size(), 1);
    quads.insert(quads.end(), p.negatives.begin(), p.negatives.end());
    labels.insert(labels.end(), p.negatives.size(), 0);
    auto s = bce_sum_tape(tape, leaf, tkge, quads, labels);
    bce = bce < 0 ? s : tape.add(bce, s);

    Rng drop(p.dropout_seed);
    auto k = ktp_sum_tape(tape, leaf, tkge, enc, p.masked, dropout_p,
                          dropout_p > 0 ? &drop : nullptr);
    if (k.node >= 0) ktp = ktp < 0 ? k.node : tape.add(ktp, k.node);
  }
  auto loss = tape.scale(bce, T(1) / static_cast<T>(tke_terms));
  if (ktp >= 0 && masked_total > 0)
    loss = tape.add(loss, tape.scale(ktp, static_cast<T>(lambda / static_cast<double>(masked_total))));
  return loss;
}

struct JointBatchStats {
  double loss_total = 0;
  double loss_tke = 0;
  double loss_ktp = 0;
  std::size_t masked_positions = 0;
  std::size_t ktp_empty_samples = 0;  // warning counter
};

// Evaluates the joint loss and (optionally) its gradients with one tape per
// sample. Per-sample gradient stores are reduced in sample order, so the
// result is bitwise independent of the worker count.
template <typename T>
JointBatchStats joint_batch(const TkgeModel<T>& tkge, const EncoderModel<T>& enc,
                            const ParamStore<T>& store, const std::vector<SamplePlan>& plans,
                            double lambda, double dropout_p, GradStore<T>* out_grads,
                            int workers = 1) {
  if (plans.empty()) throw std::runtime_error("joint loss: empty batch");
  std::size_t tke_terms = 0, masked_total = 0;
  for (const auto& p : plans) {
    tke_terms += p.positives.size() + p.negatives.size();
    masked_total += p.masked.labels.size();
  }
  const T tke_w = T(1) / static_cast<T>(tke_terms);
  const T ktp_w = masked_total > 0
                      ? static_cast<T>(lambda / static_cast<double>(masked_total))
                      : T(0);

  struct PerSample {
    double bce_sum = 0;
    double ktp_sum = 0;
    GradStore<T> grads;
  };
  std::vector<PerSample> results(plans.size());

  auto run_one = [&](std::size_t i) {
    const SamplePlan& p = plans[i];
    Tape<T> tape;
    LeafCache<T> leaf(tape, store);
    std::vector<Quadruple> quads = p.positives;
    std::vector<char> labels(p.positives.size(), 1);
    quads.insert(quads.end(), p.negatives.begin(), p.negatives.end());
    labels.insert(labels.end(), p.negatives.size(), 0);
    auto bce = bce_sum_tape(tape, leaf, tkge, quads, labels);

    Rng drop(p.dropout_seed);
    auto k = ktp_sum_tape(tape, leaf, tkge, enc, p.masked, dropout_p,
                          dropout_p > 0 ? &drop : nullptr);

    PerSample r;
    r.bce_sum = static_cast<double>(tape.val(bce).data[0]);
    auto loss = tape.scale(bce, tke_w);
    if (k.node >= 0) {
      r.ktp_sum = static_cast<double>(tape.val(k.node).data[0]);
      if (ktp_w != T(0)) loss = tape.add(loss, tape.scale(k.node, ktp_w));
    }
    if (out_grads) {
      r.grads.resize(store.size());
      tape.backward(loss, r.grads);
    }
    results[i] = std::move(r);
  };

  int lanes = std::max(1, workers);
  if (lanes == 1 || plans.size() <= 1) {
    for (std::size_t i = 0; i < plans.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < lanes; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = static_cast<std::size_t>(w); i < plans.size();
             i += static_cast<std::size_t>(lanes))
          run_one(i);
      });
    for (auto& th : pool) th.join();
  }

  JointBatchStats stats;
  stats.masked_positions = masked_total;
  double bce_total = 0, ktp_total = 0;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    bce_total += results[i].bce_sum;
    ktp_total += results[i].ktp_sum;
    if (plans[i].masked.labels.empty()) ++stats.ktp_empty_samples;
    if (out_grads) out_grads->accumulate(results[i].grads);
  }
  stats.loss_tke = bce_total / static_cast<double>(tke_terms);
  stats.loss_ktp = masked_total > 0 ? ktp_total / static_cast<double>(masked_total) : 0.0;
  stats.loss_total = stats.loss_tke + lambda * stats.loss_ktp;
  return stats;
}

}  // namespace tkgt
