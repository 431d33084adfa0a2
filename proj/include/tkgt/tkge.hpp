#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "tkgt/dataset.hpp"
#include "tkgt/params.hpp"
#include "tkgt/rng.hpp"
#include "tkgt/tape.hpp"

namespace tkgt {

// Temporal embedding families. DYERNIE is the Euclidean linear-velocity
// model scored by translational distance; DE, UTEE and SF are diachronic
// variants scored by the SimplE bilinear form with head/tail entity copies
// and inverse-predicate vectors.
enum class ModelKind { kDyernie, kDe, kUtee, kSf };

ModelKind parse_model_kind(const std::string& name);
const char* model_kind_name(ModelKind k);

enum class EntityCopy { kHead, kTail };

struct TkgeDims {
  std::size_t n_entities = 0;
  std::size_t n_predicates = 0;
  std::size_t n_timestamps = 0;
  std::size_t dim = 0;
  double gamma = 0.5;

  // gamma*d rounded to nearest integer, fixed at construction.
  std::size_t static_dim() const {
    auto sd = static_cast<long long>(std::llround(gamma * static_cast<double>(dim)));
    if (sd < 0) sd = 0;
    if (sd > static_cast<long long>(dim)) sd = static_cast<long long>(dim);
    return static_cast<std::size_t>(sd);
  }
  std::size_t temporal_dim() const { return dim - static_dim(); }

  // Normalized time in [0, 1], monotone in the index.
  double time_scalar(std::int32_t t_index) const {
    if (n_timestamps <= 1) return 0.0;
    return static_cast<double>(t_index) / static_cast<double>(n_timestamps - 1);
  }
};

// A tape-local cache of leaf ids so each parameter becomes one leaf per tape.
template <typename T>
struct LeafCache {
  Tape<T>* tape;
  const ParamStore<T>* store;
  std::vector<typename Tape<T>::Id> ids;

  LeafCache(Tape<T>& t, const ParamStore<T>& s)
      : tape(&t), store(&s), ids(s.size(), -1) {}

  typename Tape<T>::Id operator()(int pid) {
    if (pid < 0) throw std::runtime_error("leaf cache: parameter not allocated");
    if (ids[pid] < 0) ids[pid] = tape->leaf(&store->tensors[pid], pid);
    return ids[pid];
  }
};

// Learnable tensors of one temporal KG embedding model. Only the tables the
// chosen family uses are allocated; ids of unused tables stay -1.
template <typename T>
struct TkgeModel {
  ModelKind kind = ModelKind::kDyernie;
  TkgeDims dims;

  // DYERNIE
  int ent_base = -1;   // (E x d) initial embeddings
  int ent_vel = -1;    // (E x d) velocities
  int pred_diag = -1;  // (R x d) diagonal predicate matrices
  int pred_trans = -1; // (R x d) translation vectors
  int ent_bias = -1;   // (E x 1) scalar biases

  // SimplE-based families (DE, UTEE, SF)
  int pred_vec = -1;   // (R x d)
  int pred_inv = -1;   // (R x d)
  // DE: per-copy amplitude/frequency/phase, full d; first static_dim of the
  // amplitude is the time-invariant part.
  int de_amp[2] = {-1, -1};
  int de_freq[2] = {-1, -1};
  int de_phase[2] = {-1, -1};
  // UTEE: per-copy bases (first static_dim used) + one shared temporal code.
  int ent_base_copy[2] = {-1, -1};
  int utee_amp = -1, utee_freq = -1, utee_phase = -1;  // (temporal_dim)
  // SF: one static vector per entity fed to the encoder, one projection for
  // the score's static part, per-copy diachronic temporal parts.
  int ent_static = -1;            // (E x d)
  int w_sf = -1;                  // (d x static_dim)
  int sf_amp[2] = {-1, -1};       // (E x temporal_dim)
  int sf_freq[2] = {-1, -1};
  int sf_phase[2] = {-1, -1};

  void allocate(ParamStore<T>& store, Rng& rng);

  // --- plain (value) route, used by ranking ---
  std::vector<T> embed_entity(const ParamStore<T>& store, std::int32_t e, std::int32_t t_index,
                              EntityCopy copy = EntityCopy::kHead) const;
  T score(const ParamStore<T>& store, const Quadruple& q) const;

  // --- tape route, used by training ---
  typename Tape<T>::Id embed_entity_tape(Tape<T>& tape, LeafCache<T>& leaf, std::int32_t e,
                                         std::int32_t t_index,
                                         EntityCopy copy = EntityCopy::kHead) const;
  // All-entity embedding matrix (E x d) at one timestamp; backs the tied
  // entity prediction head.
  typename Tape<T>::Id embed_all_tape(Tape<T>& tape, LeafCache<T>& leaf, std::int32_t t_index,
                                      EntityCopy copy = EntityCopy::kHead) const;
  typename Tape<T>::Id score_tape(Tape<T>& tape, LeafCache<T>& leaf, const Quadruple& q) const;

  // The vector injected at the predicate position of the packed sequence.
  int predicate_table() const {
    return kind == ModelKind::kDyernie ? pred_trans : pred_vec;
  }

  void check_entity(std::int32_t e) const {
    if (e < 0 || static_cast<std::size_t>(e) >= dims.n_entities)
      throw std::runtime_error("tkge: entity id " + std::to_string(e) + " out of range");
  }
  void check_quad(const Quadruple& q) const {
    check_entity(q.subj);
    check_entity(q.obj);
    if (q.pred < 0 || static_cast<std::size_t>(q.pred) >= dims.n_predicates)
      throw std::runtime_error("tkge: predicate id " + std::to_string(q.pred) + " out of range");
    if (q.time < 0 || static_cast<std::size_t>(q.time) >= dims.n_timestamps)
      throw std::runtime_error("tkge: time index " + std::to_string(q.time) + " out of range");
  }
};

// Each negative replaces exactly one of {subject, object} with a uniformly
// random different entity; predicate and timestamp stay untouched.
std::vector<Quadruple> negative_sample(const Quadruple& q, std::size_t m, std::size_t n_entities,
                                       Rng& rng);

// --- implementation -------------------------------------------------------

template <typename T>
void TkgeModel<T>::allocate(ParamStore<T>& store, Rng& rng) {
  const std::size_t e = dims.n_entities, r = dims.n_predicates, d = dims.dim;
  const std::size_t sd = dims.static_dim(), td = dims.temporal_dim();
  if (e == 0 || r == 0 || d == 0 || dims.n_timestamps == 0)
    throw std::runtime_error("tkge: empty dimension in model construction");
  auto table = [&](const char* name, std::size_t rows, std::size_t cols) {
    return store.add(name, uniform_init<T>({rows, cols}, d, rng));
  };
  switch (kind) {
    case ModelKind::kDyernie:
      ent_base = table("tkge.ent_base", e, d);
      ent_vel = store.add("tkge.ent_vel", Tensor<T>::zeros({e, d}));
      pred_diag = table("tkge.pred_diag", r, d);
      pred_trans = table("tkge.pred_trans", r, d);
      ent_bias = store.add("tkge.ent_bias", Tensor<T>::zeros({e, 1}));
      break;
    case ModelKind::kDe:
      for (int c = 0; c < 2; ++c) {
        const char* tag = c == 0 ? "h" : "t";
        de_amp[c] = table(("tkge.de_amp_" + std::string(tag)).c_str(), e, d);
        de_freq[c] = table(("tkge.de_freq_" + std::string(tag)).c_str(), e, d);
        de_phase[c] = table(("tkge.de_phase_" + std::string(tag)).c_str(), e, d);
      }
      pred_vec = table("tkge.pred_vec", r, d);
      pred_inv = table("tkge.pred_inv", r, d);
      break;
    case ModelKind::kUtee:
      ent_base_copy[0] = table("tkge.ent_base_h", e, d);
      ent_base_copy[1] = table("tkge.ent_base_t", e, d);
      utee_amp = store.add("tkge.utee_amp", uniform_init<T>({td}, d, rng));
      utee_freq = store.add("tkge.utee_freq", uniform_init<T>({td}, d, rng));
      utee_phase = store.add("tkge.utee_phase", uniform_init<T>({td}, d, rng));
      pred_vec = table("tkge.pred_vec", r, d);
      pred_inv = table("tkge.pred_inv", r, d);
      break;
    case ModelKind::kSf:
      ent_static = table("tkge.ent_static", e, d);
      w_sf = store.add("tkge.w_sf", uniform_init<T>({d, sd}, d, rng));
      for (int c = 0; c < 2; ++c) {
        const char* tag = c == 0 ? "h" : "t";
        sf_amp[c] = table(("tkge.sf_amp_" + std::string(tag)).c_str(), e, td);
        sf_freq[c] = table(("tkge.sf_freq_" + std::string(tag)).c_str(), e, td);
        sf_phase[c] = table(("tkge.sf_phase_" + std::string(tag)).c_str(), e, td);
      }
      pred_vec = table("tkge.pred_vec", r, d);
      pred_inv = table("tkge.pred_inv", r, d);
      break;
  }
}

template <typename T>
std::vector<T> TkgeModel<T>::embed_entity(const ParamStore<T>& store, std::int32_t e,
                                          std::int32_t t_index, EntityCopy copy) const {
  check_entity(e);
  const std::size_t d = dims.dim, sd = dims.static_dim();
  const T ts = static_cast<T>(dims.time_scalar(t_index));
  const int c = copy == EntityCopy::kHead ? 0 : 1;
  std::vector<T> out(d);
  switch (kind) {
    case ModelKind::kDyernie: {
      const auto& base = store[ent_base];
      const auto& vel = store[ent_vel];
      for (std::size_t i = 0; i < d; ++i) out[i] = base.at(e, i) + vel.at(e, i) * ts;
      break;
    }
    case ModelKind::kDe: {
      const auto& a = store[de_amp[c]];
      const auto& w = store[de_freq[c]];
      const auto& b = store[de_phase[c]];
      for (std::size_t i = 0; i < d; ++i)
        out[i] = i < sd ? a.at(e, i) : a.at(e, i) * std::sin(w.at(e, i) * ts + b.at(e, i));
      break;
    }
    case ModelKind::kUtee: {
      const auto& base = store[ent_base_copy[c]];
      const auto& a = store[utee_amp];
      const auto& w = store[utee_freq];
      const auto& b = store[utee_phase];
      for (std::size_t i = 0; i < sd; ++i) out[i] = base.at(e, i);
      for (std::size_t i = sd; i < d; ++i)
        out[i] = a[i - sd] * std::sin(w[i - sd] * ts + b[i - sd]);
      break;
    }
    case ModelKind::kSf: {
      const auto& es = store[ent_static];
      const auto& proj = store[w_sf];
      const auto& a = store[sf_amp[c]];
      const auto& w = store[sf_freq[c]];
      const auto& b = store[sf_phase[c]];
      for (std::size_t i = 0; i < sd; ++i) {
        T acc = 0;
        for (std::size_t k = 0; k < d; ++k) acc += es.at(e, k) * proj.at(k, i);
        out[i] = acc;
      }
      for (std::size_t i = sd; i < d; ++i)
        out[i] = a.at(e, i - sd) * std::sin(w.at(e, i - sd) * ts + b.at(e, i - sd));
      break;
    }
  }
  return out;
}

template <typename T>
T TkgeModel<T>::score(const ParamStore<T>& store, const Quadruple& q) const {
  check_quad(q);
  const std::size_t d = dims.dim;
  if (kind == ModelKind::kDyernie) {
    auto es = embed_entity(store, q.subj, q.time);
    auto eo = embed_entity(store, q.obj, q.time);
    const auto& pd = store[pred_diag];
    const auto& pt = store[pred_trans];
    T ss = 0;
    for (std::size_t i = 0; i < d; ++i) {
      T diff = pd.at(q.pred, i) * es[i] - (eo[i] + pt.at(q.pred, i));
      ss += diff * diff;
    }
    return -std::sqrt(ss) + store[ent_bias].at(q.subj, 0) + store[ent_bias].at(q.obj, 0);
  }
  auto hs = embed_entity(store, q.subj, q.time, EntityCopy::kHead);
  auto to = embed_entity(store, q.obj, q.time, EntityCopy::kTail);
  auto ho = embed_entity(store, q.obj, q.time, EntityCopy::kHead);
  auto ts = embed_entity(store, q.subj, q.time, EntityCopy::kTail);
  const auto& p = store[pred_vec];
  const auto& pi = store[pred_inv];
  T fwd = 0, bwd = 0;
  for (std::size_t i = 0; i < d; ++i) {
    fwd += hs[i] * p.at(q.pred, i) * to[i];
    bwd += ho[i] * pi.at(q.pred, i) * ts[i];
  }
  return T(0.5) * (fwd + bwd);
}

template <typename T>
typename Tape<T>::Id TkgeModel<T>::embed_entity_tape(Tape<T>& tape, LeafCache<T>& leaf,
                                                     std::int32_t e, std::int32_t t_index,
                                                     EntityCopy copy) const {
  check_entity(e);
  const std::size_t d = dims.dim, sd = dims.static_dim();
  const T ts = static_cast<T>(dims.time_scalar(t_index));
  const int c = copy == EntityCopy::kHead ? 0 : 1;
  const auto eu = static_cast<std::size_t>(e);
  switch (kind) {
    case ModelKind::kDyernie: {
      auto base = tape.gather_row(leaf(ent_base), eu);
      auto vel = tape.gather_row(leaf(ent_vel), eu);
      return tape.add(base, tape.scale(vel, ts));
    }
    case ModelKind::kDe: {
      auto a = tape.gather_row(leaf(de_amp[c]), eu);
      auto w = tape.gather_row(leaf(de_freq[c]), eu);
      auto b = tape.gather_row(leaf(de_phase[c]), eu);
      auto stat = tape.slice(a, 0, sd);
      auto temporal = tape.mul(tape.slice(a, sd, d),
                               tape.sin(tape.add(tape.scale(tape.slice(w, sd, d), ts),
                                                 tape.slice(b, sd, d))));
      return tape.concat(stat, temporal);
    }
    case ModelKind::kUtee: {
      auto base = tape.gather_row(leaf(ent_base_copy[c]), eu);
      auto stat = tape.slice(base, 0, sd);
      auto temporal = tape.mul(leaf(utee_amp),
                               tape.sin(tape.add(tape.scale(leaf(utee_freq), ts),
                                                 leaf(utee_phase))));
      return tape.concat(stat, temporal);
    }
    case ModelKind::kSf: {
      auto es = tape.gather_rows(leaf(ent_static), {eu});
      auto stat = tape.reshape(tape.matmul(es, leaf(w_sf)), {sd});
      auto a = tape.gather_row(leaf(sf_amp[c]), eu);
      auto w = tape.gather_row(leaf(sf_freq[c]), eu);
      auto b = tape.gather_row(leaf(sf_phase[c]), eu);
      auto temporal = tape.mul(a, tape.sin(tape.add(tape.scale(w, ts), b)));
      return tape.concat(stat, temporal);
    }
  }
  throw std::runtime_error("tkge: unreachable model kind");
}

template <typename T>
typename Tape<T>::Id TkgeModel<T>::embed_all_tape(Tape<T>& tape, LeafCache<T>& leaf,
                                                  std::int32_t t_index, EntityCopy copy) const {
  const std::size_t d = dims.dim, sd = dims.static_dim(), e = dims.n_entities;
  const T ts = static_cast<T>(dims.time_scalar(t_index));
  const int c = copy == EntityCopy::kHead ? 0 : 1;
  switch (kind) {
    case ModelKind::kDyernie:
      return tape.add(leaf(ent_base), tape.scale(leaf(ent_vel), ts));
    case ModelKind::kDe: {
      auto a = leaf(de_amp[c]);
      auto w = leaf(de_freq[c]);
      auto b = leaf(de_phase[c]);
      auto stat = tape.slice_cols(a, 0, sd);
      auto temporal = tape.mul(tape.slice_cols(a, sd, d),
                               tape.sin(tape.add(tape.scale(tape.slice_cols(w, sd, d), ts),
                                                 tape.slice_cols(b, sd, d))));
      return tape.concat_cols(stat, temporal);
    }
    case ModelKind::kUtee: {
      auto stat = tape.slice_cols(leaf(ent_base_copy[c]), 0, sd);
      auto temporal_row =
          tape.mul(leaf(utee_amp),
                   tape.sin(tape.add(tape.scale(leaf(utee_freq), ts),
                                     leaf(utee_phase))));
      std::vector<typename Tape<T>::Id> rows(e, temporal_row);
      return tape.concat_cols(stat, tape.stack_rows(rows));
    }
    case ModelKind::kSf: {
      auto stat = tape.matmul(leaf(ent_static), leaf(w_sf));
      auto temporal = tape.mul(leaf(sf_amp[c]),
                               tape.sin(tape.add(tape.scale(leaf(sf_freq[c]), ts),
                                                 leaf(sf_phase[c]))));
      return tape.concat_cols(stat, temporal);
    }
  }
  throw std::runtime_error("tkge: unreachable model kind");
}

template <typename T>
typename Tape<T>::Id TkgeModel<T>::score_tape(Tape<T>& tape, LeafCache<T>& leaf,
                                              const Quadruple& q) const {
  check_quad(q);
  const auto pu = static_cast<std::size_t>(q.pred);
  if (kind == ModelKind::kDyernie) {
    auto es = embed_entity_tape(tape, leaf, q.subj, q.time);
    auto eo = embed_entity_tape(tape, leaf, q.obj, q.time);
    auto pd = tape.gather_row(leaf(pred_diag), pu);
    auto pt = tape.gather_row(leaf(pred_trans), pu);
    auto dist = tape.euclid_dist(tape.mul(pd, es), tape.add(eo, pt));
    auto bs = tape.reshape(tape.gather_rows(leaf(ent_bias), {static_cast<std::size_t>(q.subj)}), {1});
    auto bo = tape.reshape(tape.gather_rows(leaf(ent_bias), {static_cast<std::size_t>(q.obj)}), {1});
    return tape.add(tape.scale(dist, T(-1)), tape.add(bs, bo));
  }
  auto hs = embed_entity_tape(tape, leaf, q.subj, q.time, EntityCopy::kHead);
  auto to = embed_entity_tape(tape, leaf, q.obj, q.time, EntityCopy::kTail);
  auto ho = embed_entity_tape(tape, leaf, q.obj, q.time, EntityCopy::kHead);
  auto tsub = embed_entity_tape(tape, leaf, q.subj, q.time, EntityCopy::kTail);
  auto p = tape.gather_row(leaf(pred_vec), pu);
  auto pi = tape.gather_row(leaf(pred_inv), pu);
  auto fwd = tape.sum(tape.mul(tape.mul(hs, p), to));
  auto bwd = tape.sum(tape.mul(tape.mul(ho, pi), tsub));
  return tape.scale(tape.add(fwd, bwd), T(0.5));
}

// Binary cross entropy over scores: -[y log sigmoid(phi) + (1-y) log(1-sigmoid(phi))],
// summed (not averaged) over the given labeled quadruples.
template <typename T>
typename Tape<T>::Id bce_sum_tape(Tape<T>& tape, LeafCache<T>& leaf, const TkgeModel<T>& model,
                                  const std::vector<Quadruple>& quads,
                                  const std::vector<char>& labels) {
  typename Tape<T>::Id total = -1;
  auto one = tape.scalar_const(T(1));
  for (std::size_t i = 0; i < quads.size(); ++i) {
    auto phi = model.score_tape(tape, leaf, quads[i]);
    auto p = tape.sigmoid(phi);
    auto arg = labels[i] ? p : tape.sub(one, p);
    auto term = tape.scale(tape.log_clamped(arg), T(-1));
    total = total < 0 ? term : tape.add(total, term);
  }
  return total;
}

// Mean BCE loss over positives plus m negatives each, as one tape.
template <typename T>
typename Tape<T>::Id tke_loss_tape(Tape<T>& tape, LeafCache<T>& leaf, const TkgeModel<T>& model,
                                   const std::vector<Quadruple>& positives, std::size_t m,
                                   Rng& rng) {
  if (positives.empty()) throw std::runtime_error("tke_loss: empty batch");
  std::vector<Quadruple> quads;
  std::vector<char> labels;
  for (const auto& pos : positives) {
    quads.push_back(pos);
    labels.push_back(1);
    if (m > 0) {
      for (const auto& neg : negative_sample(pos, m, model.dims.n_entities, rng)) {
        quads.push_back(neg);
        labels.push_back(0);
      }
    }
  }
  auto sum = bce_sum_tape(tape, leaf, model, quads, labels);
  return tape.scale(sum, T(1) / static_cast<T>(quads.size()));
}

}  // namespace tkgt
