#include "tkgt/encoder.hpp"

namespace tkgt {

int token_type_of(SlotKind kind) {
  switch (kind) {
    case SlotKind::kEntity: return kTypeEntity;
    case SlotKind::kPredicate: return kTypePredicate;
    case SlotKind::kTime: return kTypeTime;
    default: return kTypeSubword;
  }
}

BuiltInput build_input(const AlignedSample& sample, std::size_t maxlen) {
  if (maxlen < kTemplateSlots + 1)
    throw std::runtime_error("build_input: maxlen " + std::to_string(maxlen) +
                             " leaves no room for text");
  BuiltInput b;
  b.quad = sample.quad;
  std::size_t text_len = std::min(sample.tokens.size(), maxlen - kTemplateSlots);
  b.text_len = text_len;
  b.slots.reserve(kTemplateSlots + text_len);
  b.slots.push_back({SlotKind::kCls, kCls, Replacement::kNone, -1});
  b.slots.push_back({SlotKind::kEntity, sample.quad.subj, Replacement::kNone, -1});
  b.slots.push_back({SlotKind::kPredicate, sample.quad.pred, Replacement::kNone, -1});
  b.slots.push_back({SlotKind::kEntity, sample.quad.obj, Replacement::kNone, -1});
  b.slots.push_back({SlotKind::kTime, sample.quad.time, Replacement::kNone, -1});
  b.slots.push_back({SlotKind::kSep, kSep, Replacement::kNone, -1});
  for (std::size_t i = 0; i < text_len; ++i)
    b.slots.push_back({SlotKind::kSubword, sample.tokens[i], Replacement::kNone, -1});
  b.slots.push_back({SlotKind::kSep, kSep, Replacement::kNone, -1});
  return b;
}

InputSequence BuiltInput::sequence() const {
  InputSequence seq;
  seq.token_ids.reserve(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const Slot& s = slots[i];
    seq.token_ids.push_back(s.effective_id());
    seq.type_ids.push_back(token_type_of(s.kind));
    seq.position_ids.push_back(static_cast<int>(i));
    seq.attention.push_back(s.kind == SlotKind::kPad ? 0 : 1);
  }
  return seq;
}

}  // namespace tkgt
