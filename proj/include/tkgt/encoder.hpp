#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tkgt/tkge.hpp"

namespace tkgt {

// Token type ids; these double as head-space tags for masked prediction.
enum TokenType : int { kTypeSubword = 0, kTypeEntity = 1, kTypePredicate = 2, kTypeTime = 3 };
constexpr std::size_t kNumTokenTypes = 4;

// Fixed packed-sequence template: [CLS] e_s p e_o tau [SEP] w_1 .. w_n [SEP].
constexpr std::size_t kPosCls = 0;
constexpr std::size_t kPosSubj = 1;
constexpr std::size_t kPosPred = 2;
constexpr std::size_t kPosObj = 3;
constexpr std::size_t kPosTime = 4;
constexpr std::size_t kPosSep1 = 5;
constexpr std::size_t kPosTextStart = 6;
constexpr std::size_t kTemplateSlots = 7;  // everything except the text tokens

enum class SlotKind { kCls, kSep, kEntity, kPredicate, kTime, kSubword, kPad };

enum class Replacement { kNone, kMaskToken, kRandom, kKept };

struct Slot {
  SlotKind kind = SlotKind::kPad;
  int id = -1;  // id within the slot's own space
  Replacement repl = Replacement::kNone;
  int random_id = -1;

  bool masked() const { return repl != Replacement::kNone; }
  // Id seen by the forward pass ([MASK] substitution handled separately).
  int effective_id() const { return repl == Replacement::kRandom ? random_id : id; }
};

// Packed per-position sequences of ids over mixed spaces.
struct InputSequence {
  std::vector<int> token_ids;
  std::vector<int> type_ids;
  std::vector<int> position_ids;
  std::vector<std::uint8_t> attention;  // 1 = real, 0 = pad
  std::size_t length() const { return token_ids.size(); }
};

struct BuiltInput {
  Quadruple quad;
  std::vector<Slot> slots;
  std::size_t text_len = 0;

  InputSequence sequence() const;
  std::size_t length() const { return slots.size(); }
};

// Lays a sample out on the fixed template; overlong text is truncated.
BuiltInput build_input(const AlignedSample& sample, std::size_t maxlen);

int token_type_of(SlotKind kind);

struct EncoderDims {
  std::size_t dim = 64;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t maxlen = 64;
  std::size_t n_subwords = 0;
  std::size_t n_timestamps = 0;
};

// Trainable pre-norm transformer encoder over the packed sequence. Entity
// and predicate positions have no tables of their own: they carry the
// temporal KG model's embeddings, so both objectives share those tables.
// Prediction heads are tied to the corresponding embedding tables.
template <typename T>
struct EncoderModel {
  EncoderDims dims;

  int subword_table = -1;  // (V_w x d)
  int time_table = -1;     // (T x d)
  int type_table = -1;     // (4 x d)
  int pos_table = -1;      // (maxlen x d)

  struct Layer {
    int ln1_g, ln1_b;
    int wq, bq, wk, bk, wv, bv, wo, bo;
    int ln2_g, ln2_b;
    int w1, b1, w2, b2;
  };
  std::vector<Layer> layers;
  int lnf_g = -1, lnf_b = -1;

  void allocate(ParamStore<T>& store, Rng& rng);

  using Id = typename Tape<T>::Id;

  // Input embedding matrix (len x d): token + type + position embeddings,
  // with the knowledge positions carrying injected tKG vectors.
  Id embed_input_tape(Tape<T>& tape, LeafCache<T>& leaf, const TkgeModel<T>& tkge,
                      const BuiltInput& input) const;

  // L layers of masked multi-head self-attention + feed-forward, pre-norm.
  // Dropout applies only when drop_rng is given and p > 0.
  Id encode_tape(Tape<T>& tape, LeafCache<T>& leaf, Id x,
                 const std::vector<std::uint8_t>& attention, double dropout_p = 0.0,
                 Rng* drop_rng = nullptr) const;

  // Logits of one head at one position; tied to the head's embedding table.
  // For the entity head the table is the all-entity embedding matrix at the
  // sample's own timestamp (the static table for SF).
  Id head_logits_tape(Tape<T>& tape, LeafCache<T>& leaf, const TkgeModel<T>& tkge, Id states,
                      const BuiltInput& input, std::size_t position, int head_space) const;
};

// --- implementation --------------------------------------------------------

template <typename T>
void EncoderModel<T>::allocate(ParamStore<T>& store, Rng& rng) {
  const std::size_t d = dims.dim;
  if (d == 0 || dims.layers == 0 || dims.heads == 0 || d % dims.heads != 0)
    throw std::runtime_error("encoder: dim must be a positive multiple of heads");
  if (dims.n_subwords == 0 || dims.n_timestamps == 0 || dims.maxlen < kTemplateSlots + 1)
    throw std::runtime_error("encoder: vocabulary sizes and maxlen must be positive");

  auto table = [&](const std::string& name, std::size_t r, std::size_t c) {
    return store.add(name, uniform_init<T>({r, c}, d, rng));
  };
  auto zeros = [&](const std::string& name, std::size_t n) {
    return store.add(name, Tensor<T>::zeros({n}));
  };
  auto ones = [&](const std::string& name, std::size_t n) {
    return store.add(name, Tensor<T>::full({n}, T(1)));
  };

  subword_table = table("enc.subword_table", dims.n_subwords, d);
  time_table = table("enc.time_table", dims.n_timestamps, d);
  type_table = table("enc.type_table", kNumTokenTypes, d);
  pos_table = table("enc.pos_table", dims.maxlen, d);

  layers.clear();
  for (std::size_t l = 0; l < dims.layers; ++l) {
    std::string p = "enc.layer" + std::to_string(l) + ".";
    Layer lay;
    lay.ln1_g = ones(p + "ln1_g", d);
    lay.ln1_b = zeros(p + "ln1_b", d);
    lay.wq = table(p + "wq", d, d);
    lay.bq = zeros(p + "bq", d);
    lay.wk = table(p + "wk", d, d);
    lay.bk = zeros(p + "bk", d);
    lay.wv = table(p + "wv", d, d);
    lay.bv = zeros(p + "bv", d);
    lay.wo = table(p + "wo", d, d);
    lay.bo = zeros(p + "bo", d);
    lay.ln2_g = ones(p + "ln2_g", d);
    lay.ln2_b = zeros(p + "ln2_b", d);
    lay.w1 = table(p + "w1", d, 4 * d);
    lay.b1 = zeros(p + "b1", 4 * d);
    lay.w2 = table(p + "w2", 4 * d, d);
    lay.b2 = zeros(p + "b2", d);
    layers.push_back(lay);
  }
  lnf_g = ones("enc.lnf_g", d);
  lnf_b = zeros("enc.lnf_b", d);
}

template <typename T>
typename EncoderModel<T>::Id EncoderModel<T>::embed_input_tape(Tape<T>& tape, LeafCache<T>& leaf,
                                                               const TkgeModel<T>& tkge,
                                                               const BuiltInput& input) const {
  if (input.length() > dims.maxlen)
    throw std::runtime_error("encoder: sequence length " + std::to_string(input.length()) +
                             " exceeds maxlen " + std::to_string(dims.maxlen));
  auto subwords = leaf(subword_table);
  std::vector<Id> rows;
  rows.reserve(input.length());
  for (const auto& slot : input.slots) {
    if (slot.repl == Replacement::kMaskToken) {
      rows.push_back(tape.gather_row(subwords, kMaskTok));
      continue;
    }
    switch (slot.kind) {
      case SlotKind::kCls:
        rows.push_back(tape.gather_row(subwords, kCls));
        break;
      case SlotKind::kSep:
        rows.push_back(tape.gather_row(subwords, kSep));
        break;
      case SlotKind::kPad:
        rows.push_back(tape.gather_row(subwords, kPad));
        break;
      case SlotKind::kSubword:
        rows.push_back(tape.gather_row(subwords, static_cast<std::size_t>(slot.effective_id())));
        break;
      case SlotKind::kEntity:
        // the time-dependent embedding at the sample's timestamp; SF injects
        // its static vector instead
        if (tkge.kind == ModelKind::kSf)
          rows.push_back(tape.gather_row(leaf(tkge.ent_static),
                                         static_cast<std::size_t>(slot.effective_id())));
        else
          rows.push_back(
              tkge.embed_entity_tape(tape, leaf, slot.effective_id(), input.quad.time));
        break;
      case SlotKind::kPredicate:
        rows.push_back(tape.gather_row(leaf(tkge.predicate_table()),
                                       static_cast<std::size_t>(slot.effective_id())));
        break;
      case SlotKind::kTime:
        rows.push_back(
            tape.gather_row(leaf(time_table), static_cast<std::size_t>(slot.effective_id())));
        break;
    }
  }
  auto x = tape.stack_rows(std::move(rows));

  auto seq = input.sequence();
  std::vector<std::size_t> type_idx(seq.type_ids.begin(), seq.type_ids.end());
  std::vector<std::size_t> pos_idx(seq.position_ids.begin(), seq.position_ids.end());
  x = tape.add(x, tape.gather_rows(leaf(type_table), type_idx));
  x = tape.add(x, tape.gather_rows(leaf(pos_table), pos_idx));
  return x;
}

template <typename T>
typename EncoderModel<T>::Id EncoderModel<T>::encode_tape(Tape<T>& tape, LeafCache<T>& leaf, Id x,
                                                          const std::vector<std::uint8_t>& attention,
                                                          double dropout_p, Rng* drop_rng) const {
  const std::size_t d = dims.dim;
  const std::size_t dh = d / dims.heads;
  const T scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dh)));
  const bool drop = drop_rng != nullptr && dropout_p > 0.0;

  for (const auto& lay : layers) {
    auto a = tape.layer_norm(x, leaf(lay.ln1_g), leaf(lay.ln1_b));
    auto q = tape.add_rowwise(tape.matmul(a, leaf(lay.wq)), leaf(lay.bq));
    auto k = tape.add_rowwise(tape.matmul(a, leaf(lay.wk)), leaf(lay.bk));
    auto v = tape.add_rowwise(tape.matmul(a, leaf(lay.wv)), leaf(lay.bv));

    Id ctx = -1;
    for (std::size_t h = 0; h < dims.heads; ++h) {
      auto qh = tape.slice_cols(q, h * dh, (h + 1) * dh);
      auto kh = tape.slice_cols(k, h * dh, (h + 1) * dh);
      auto vh = tape.slice_cols(v, h * dh, (h + 1) * dh);
      auto scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), scale);
      auto probs = tape.softmax_rows(scores, attention);
      if (drop) probs = tape.dropout(probs, dropout_p, *drop_rng);
      auto ctx_h = tape.matmul(probs, vh);
      ctx = ctx < 0 ? ctx_h : tape.concat_cols(ctx, ctx_h);
    }
    auto attn_out = tape.add_rowwise(tape.matmul(ctx, leaf(lay.wo)), leaf(lay.bo));
    if (drop) attn_out = tape.dropout(attn_out, dropout_p, *drop_rng);
    x = tape.add(x, attn_out);

    auto b = tape.layer_norm(x, leaf(lay.ln2_g), leaf(lay.ln2_b));
    auto hidden = tape.gelu(tape.add_rowwise(tape.matmul(b, leaf(lay.w1)), leaf(lay.b1)));
    auto ff = tape.add_rowwise(tape.matmul(hidden, leaf(lay.w2)), leaf(lay.b2));
    if (drop) ff = tape.dropout(ff, dropout_p, *drop_rng);
    x = tape.add(x, ff);
  }
  return tape.layer_norm(x, leaf(lnf_g), leaf(lnf_b));
}

template <typename T>
typename EncoderModel<T>::Id EncoderModel<T>::head_logits_tape(Tape<T>& tape, LeafCache<T>& leaf,
                                                               const TkgeModel<T>& tkge, Id states,
                                                               const BuiltInput& input,
                                                               std::size_t position,
                                                               int head_space) const {
  if (position >= input.length())
    throw std::runtime_error("head_logits: position " + std::to_string(position) +
                             " outside sequence of length " + std::to_string(input.length()));
  int slot_space = token_type_of(input.slots[position].kind);
  if (slot_space != head_space)
    throw std::runtime_error("head_logits: head space " + std::to_string(head_space) +
                             " does not match token type " + std::to_string(slot_space) +
                             " at position " + std::to_string(position));
  Id table;
  switch (head_space) {
    case kTypeEntity:
      table = tkge.kind == ModelKind::kSf ? leaf(tkge.ent_static)
                                          : tkge.embed_all_tape(tape, leaf, input.quad.time);
      break;
    case kTypePredicate:
      table = leaf(tkge.predicate_table());
      break;
    case kTypeTime:
      table = leaf(time_table);
      break;
    default:
      table = leaf(subword_table);
      break;
  }
  auto state = tape.reshape(tape.row(states, position), {1, dims.dim});
  auto logits = tape.matmul(state, tape.transpose(table));
  return tape.reshape(logits, {tape.val(table).rows()});
}

}  // namespace tkgt
