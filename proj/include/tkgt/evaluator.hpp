#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tkgt/encoder.hpp"
#include "tkgt/tkge.hpp"

namespace tkgt {

// A link-prediction query with exactly one open slot; the ground truth sits
// in the quadruple's open position.
struct Query {
  bool replace_object = true;
  Quadruple quad;
};

struct RankingReport {
  std::string setting;  // "raw" or "filtered"
  double mrr = 0;
  double hits1 = 0, hits3 = 0, hits10 = 0;
  std::size_t n_queries = 0;
  std::vector<double> ranks;  // per query, in evaluation order
};

struct EvalResult {
  RankingReport raw;
  RankingReport filtered;
};

// Mean-tie rank of the candidate `gt` within `scores`: 1 + |strictly greater|
// + |ties among kept others| / 2. `removed` marks filtered-out candidates and
// never includes the ground truth. Invariant under any strictly increasing
// transform of the scores.
double rank_from_scores(const std::vector<double>& scores, std::size_t gt,
                        const std::vector<char>* removed);

// Scores of every candidate entity in the query's open slot.
template <typename T>
std::vector<double> score_candidates(const TkgeModel<T>& model, const ParamStore<T>& store,
                                     const Query& q) {
  model.check_quad(q.quad);
  const std::size_t e = model.dims.n_entities;
  const std::size_t d = model.dims.dim;
  std::vector<double> scores(e);
  if (model.kind == ModelKind::kDyernie) {
    const auto& pd = store[model.pred_diag];
    const auto& pt = store[model.pred_trans];
    const auto& bias = store[model.ent_bias];
    const auto p = static_cast<std::size_t>(q.quad.pred);
    if (q.replace_object) {
      auto es = model.embed_entity(store, q.quad.subj, q.quad.time);
      std::vector<T> u(d);
      for (std::size_t i = 0; i < d; ++i) u[i] = pd.at(p, i) * es[i] - pt.at(p, i);
      T bs = bias.at(q.quad.subj, 0);
      for (std::size_t c = 0; c < e; ++c) {
        auto ec = model.embed_entity(store, static_cast<std::int32_t>(c), q.quad.time);
        T ss = 0;
        for (std::size_t i = 0; i < d; ++i) {
          T diff = u[i] - ec[i];
          ss += diff * diff;
        }
        scores[c] = static_cast<double>(-std::sqrt(ss) + bs + bias.at(c, 0));
      }
    } else {
      auto eo = model.embed_entity(store, q.quad.obj, q.quad.time);
      std::vector<T> w(d);
      for (std::size_t i = 0; i < d; ++i) w[i] = eo[i] + pt.at(p, i);
      T bo = bias.at(q.quad.obj, 0);
      for (std::size_t c = 0; c < e; ++c) {
        auto ec = model.embed_entity(store, static_cast<std::int32_t>(c), q.quad.time);
        T ss = 0;
        for (std::size_t i = 0; i < d; ++i) {
          T diff = pd.at(p, i) * ec[i] - w[i];
          ss += diff * diff;
        }
        scores[c] = static_cast<double>(-std::sqrt(ss) + bias.at(c, 0) + bo);
      }
    }
    return scores;
  }

  const auto& p = store[model.pred_vec];
  const auto& pi = store[model.pred_inv];
  const auto pr = static_cast<std::size_t>(q.quad.pred);
  std::vector<T> a(d), b(d);
  if (q.replace_object) {
    auto hs = model.embed_entity(store, q.quad.subj, q.quad.time, EntityCopy::kHead);
    auto ts = model.embed_entity(store, q.quad.subj, q.quad.time, EntityCopy::kTail);
    for (std::size_t i = 0; i < d; ++i) {
      a[i] = hs[i] * p.at(pr, i);   // dot with candidate tail copy
      b[i] = pi.at(pr, i) * ts[i];  // dot with candidate head copy
    }
  } else {
    auto ho = model.embed_entity(store, q.quad.obj, q.quad.time, EntityCopy::kHead);
    auto to = model.embed_entity(store, q.quad.obj, q.quad.time, EntityCopy::kTail);
    for (std::size_t i = 0; i < d; ++i) {
      a[i] = p.at(pr, i) * to[i];   // dot with candidate head copy
      b[i] = ho[i] * pi.at(pr, i);  // dot with candidate tail copy
    }
  }
  for (std::size_t c = 0; c < e; ++c) {
    auto hc = model.embed_entity(store, static_cast<std::int32_t>(c), q.quad.time,
                                 EntityCopy::kHead);
    auto tc = model.embed_entity(store, static_cast<std::int32_t>(c), q.quad.time,
                                 EntityCopy::kTail);
    T fwd = 0, bwd = 0;
    for (std::size_t i = 0; i < d; ++i) {
      if (q.replace_object) {
        fwd += a[i] * tc[i];
        bwd += b[i] * hc[i];
      } else {
        fwd += a[i] * hc[i];
        bwd += b[i] * tc[i];
      }
    }
    scores[c] = static_cast<double>(T(0.5) * (fwd + bwd));
  }
  return scores;
}

// Marks candidates whose completed quadruple (same timestamp) is a known
// fact; the ground truth itself is never removed.
template <typename T>
std::vector<char> filter_marks(const TkgeModel<T>& model, const Query& q,
                               const QuadSet& filter) {
  const std::size_t e = model.dims.n_entities;
  std::vector<char> removed(e, 0);
  std::size_t gt =
      static_cast<std::size_t>(q.replace_object ? q.quad.obj : q.quad.subj);
  for (std::size_t c = 0; c < e; ++c) {
    if (c == gt) continue;
    Quadruple completed = q.quad;
    (q.replace_object ? completed.obj : completed.subj) = static_cast<std::int32_t>(c);
    removed[c] = filter.count(quad_key(completed)) > 0 ? 1 : 0;
  }
  return removed;
}

template <typename T>
double rank_query(const TkgeModel<T>& model, const ParamStore<T>& store, const Query& q,
                  const QuadSet* filter) {
  auto scores = score_candidates(model, store, q);
  std::size_t gt = static_cast<std::size_t>(q.replace_object ? q.quad.obj : q.quad.subj);
  if (filter == nullptr) return rank_from_scores(scores, gt, nullptr);
  auto removed = filter_marks(model, q, *filter);
  return rank_from_scores(scores, gt, &removed);
}

RankingReport aggregate_ranks(std::vector<double> ranks, const std::string& setting);

// Both query directions per test quadruple; raw and filtered settings come
// from the same candidate scores.
template <typename T>
EvalResult evaluate(const TkgeModel<T>& model, const ParamStore<T>& store,
                    const std::vector<Quadruple>& test, const QuadSet& filter) {
  if (test.empty()) throw std::runtime_error("evaluate: empty test split");
  std::vector<double> raw_ranks, filt_ranks;
  raw_ranks.reserve(2 * test.size());
  filt_ranks.reserve(2 * test.size());
  for (const auto& quad : test) {
    for (bool replace_object : {true, false}) {
      Query q{replace_object, quad};
      auto scores = score_candidates(model, store, q);
      std::size_t gt = static_cast<std::size_t>(replace_object ? quad.obj : quad.subj);
      auto removed = filter_marks(model, q, filter);
      raw_ranks.push_back(rank_from_scores(scores, gt, nullptr));
      filt_ranks.push_back(rank_from_scores(scores, gt, &removed));
    }
  }
  return {aggregate_ranks(std::move(raw_ranks), "raw"),
          aggregate_ranks(std::move(filt_ranks), "filtered")};
}

// Entity scores from the masked-entity prediction head: the queried entity
// position carries [MASK], the contextual state is scored against every
// candidate through the tied entity table.
template <typename T>
std::vector<double> text_entity_scores(const TkgeModel<T>& tkge, const EncoderModel<T>& enc,
                                       const ParamStore<T>& store, const AlignedSample& sample,
                                       bool replace_object) {
  auto input = build_input(sample, enc.dims.maxlen);
  std::size_t pos = replace_object ? kPosObj : kPosSubj;
  input.slots[pos].repl = Replacement::kMaskToken;

  Tape<T> tape;
  LeafCache<T> leaf(tape, store);
  auto x = enc.embed_input_tape(tape, leaf, tkge, input);
  auto states = enc.encode_tape(tape, leaf, x, input.sequence().attention);
  auto logits = enc.head_logits_tape(tape, leaf, tkge, states, input, pos, kTypeEntity);
  const auto& v = tape.val(logits);
  std::vector<double> scores(v.numel());
  for (std::size_t i = 0; i < v.numel(); ++i) scores[i] = static_cast<double>(v[i]);
  return scores;
}

template <typename T>
double predict_with_text(const TkgeModel<T>& tkge, const EncoderModel<T>& enc,
                         const ParamStore<T>& store, const AlignedSample& sample,
                         bool replace_object, const QuadSet* filter) {
  if (sample.tokens.empty())
    throw std::runtime_error("predict_with_text: sample has no textual description");
  tkge.check_quad(sample.quad);
  auto scores = text_entity_scores(tkge, enc, store, sample, replace_object);
  std::size_t gt =
      static_cast<std::size_t>(replace_object ? sample.quad.obj : sample.quad.subj);
  if (filter == nullptr) return rank_from_scores(scores, gt, nullptr);
  Query q{replace_object, sample.quad};
  auto removed = filter_marks(tkge, q, *filter);
  return rank_from_scores(scores, gt, &removed);
}

template <typename T>
EvalResult evaluate_with_text(const TkgeModel<T>& tkge, const EncoderModel<T>& enc,
                              const ParamStore<T>& store,
                              const std::vector<AlignedSample>& test_aligned,
                              const QuadSet& filter) {
  if (test_aligned.empty())
    throw std::runtime_error("evaluate: empty aligned test set");
  std::vector<double> raw_ranks, filt_ranks;
  for (const auto& sample : test_aligned) {
    for (bool replace_object : {true, false}) {
      auto scores = text_entity_scores(tkge, enc, store, sample, replace_object);
      std::size_t gt =
          static_cast<std::size_t>(replace_object ? sample.quad.obj : sample.quad.subj);
      Query q{replace_object, sample.quad};
      auto removed = filter_marks(tkge, q, filter);
      raw_ranks.push_back(rank_from_scores(scores, gt, nullptr));
      filt_ranks.push_back(rank_from_scores(scores, gt, &removed));
    }
  }
  return {aggregate_ranks(std::move(raw_ranks), "raw"),
          aggregate_ranks(std::move(filt_ranks), "filtered")};
}

// Plain-text and JSON renderings of a report (the JSON schema is fixed:
// setting, mrr, hits1, hits3, hits10, n_queries).
std::string report_json(const RankingReport& r);
std::string report_table(const RankingReport& raw, const RankingReport& filtered);

}  // namespace tkgt
