#include "tkgt/ktp.hpp"

#include <algorithm>

namespace tkgt {

MaskingStrategy parse_masking_strategy(const std::string& name) {
  if (name == "e_r_w_joint") return MaskingStrategy::kJointErw;
  if (name == "e_or_r_plus_w") return MaskingStrategy::kEitherEOrRPlusW;
  if (name == "e_or_r_or_w") return MaskingStrategy::kOneOfErw;
  throw std::runtime_error("unknown masking strategy: " + name +
                           " (expected e_r_w_joint, e_or_r_plus_w, or e_or_r_or_w)");
}

const char* masking_strategy_name(MaskingStrategy s) {
  switch (s) {
    case MaskingStrategy::kJointErw: return "e_r_w_joint";
    case MaskingStrategy::kEitherEOrRPlusW: return "e_or_r_plus_w";
    case MaskingStrategy::kOneOfErw: return "e_or_r_or_w";
  }
  return "?";
}

namespace {

// Uniform over the slot's space excluding the original id (and special
// tokens in the subword space). Falls back to [MASK] when the space is too
// small to draw from.
bool draw_random_id(SlotKind kind, int original, const SpaceSizes& sizes, Rng& rng, int* out) {
  switch (kind) {
    case SlotKind::kEntity:
      if (sizes.entities < 2) return false;
      *out = static_cast<int>(
          rng.uniform_index_excluding(sizes.entities, static_cast<std::size_t>(original)));
      return true;
    case SlotKind::kPredicate:
      if (sizes.predicates < 2) return false;
      *out = static_cast<int>(
          rng.uniform_index_excluding(sizes.predicates, static_cast<std::size_t>(original)));
      return true;
    case SlotKind::kTime:
      if (sizes.timestamps < 2) return false;
      *out = static_cast<int>(
          rng.uniform_index_excluding(sizes.timestamps, static_cast<std::size_t>(original)));
      return true;
    case SlotKind::kSubword: {
      std::size_t regular = sizes.subwords > kNumSpecials ? sizes.subwords - kNumSpecials : 0;
      if (original >= kNumSpecials) {
        if (regular < 2) return false;
        *out = kNumSpecials +
               static_cast<int>(rng.uniform_index_excluding(
                   regular, static_cast<std::size_t>(original) - kNumSpecials));
      } else {
        if (regular < 1) return false;
        *out = kNumSpecials + static_cast<int>(rng.uniform_index(regular));
      }
      return true;
    }
    default:
      return false;
  }
}

}  // namespace

MaskedSample mask_sample(const BuiltInput& input, const MaskingConfig& cfg,
                         const SpaceSizes& sizes, Rng& rng) {
  MaskedSample out{input, {}};
  const std::size_t text_end = kPosTextStart + input.text_len;

  std::vector<std::size_t> chosen;
  auto mask_subwords = [&] {
    for (std::size_t pos = kPosTextStart; pos < text_end; ++pos)
      if (rng.bernoulli(cfg.rate)) chosen.push_back(pos);
  };
  switch (cfg.strategy) {
    case MaskingStrategy::kJointErw:
      for (std::size_t pos : {kPosSubj, kPosPred, kPosObj})
        if (rng.bernoulli(cfg.rate)) chosen.push_back(pos);
      mask_subwords();
      break;
    case MaskingStrategy::kEitherEOrRPlusW: {
      std::size_t pick = rng.uniform_index(3);
      chosen.push_back(pick == 0 ? kPosSubj : pick == 1 ? kPosPred : kPosObj);
      mask_subwords();
      break;
    }
    case MaskingStrategy::kOneOfErw: {
      std::size_t category = rng.uniform_index(3);
      if (category == 0)
        mask_subwords();
      else if (category == 1)
        chosen.push_back(rng.uniform_index(2) == 0 ? kPosSubj : kPosObj);
      else
        chosen.push_back(kPosPred);
      break;
    }
  }
  if (cfg.mask_time && rng.bernoulli(cfg.rate)) chosen.push_back(kPosTime);
  std::sort(chosen.begin(), chosen.end());

  for (std::size_t pos : chosen) {
    Slot& slot = out.input.slots[pos];
    double u = rng.uniform();
    Replacement repl =
        u < 0.8 ? Replacement::kMaskToken : u < 0.9 ? Replacement::kRandom : Replacement::kKept;
    int random_id = -1;
    if (repl == Replacement::kRandom &&
        !draw_random_id(slot.kind, slot.id, sizes, rng, &random_id))
      repl = Replacement::kMaskToken;
    slot.repl = repl;
    slot.random_id = random_id;
    out.labels.push_back({pos, token_type_of(slot.kind), slot.id, repl});
  }
  return out;
}

SamplePlan plan_sample(const AlignedSample& sample, const JointConfig& jc,
                       const SpaceSizes& sizes, std::size_t n_entities, std::size_t maxlen,
                       const Vocabulary* vocab_for_reciprocal, std::uint64_t seed) {
  SamplePlan p;
  auto built = build_input(sample, maxlen);
  Rng mask_rng(derive_seed(seed, 1));
  p.masked = mask_sample(built, jc.masking, sizes, mask_rng);

  p.positives.push_back(sample.quad);
  if (jc.reciprocals) {
    if (!vocab_for_reciprocal || !vocab_for_reciprocal->has_reciprocals)
      throw std::runtime_error("plan_sample: reciprocal training needs an augmented vocabulary");
    p.positives.push_back(reciprocal_of(sample.quad, *vocab_for_reciprocal));
  }
  if (jc.negatives > 0) {
    Rng neg_rng(derive_seed(seed, 2));
    for (const auto& pos : p.positives)
      for (const auto& neg : negative_sample(pos, jc.negatives, n_entities, neg_rng))
        p.negatives.push_back(neg);
  }
  p.dropout_seed = derive_seed(seed, 3);
  return p;
}

}  // namespace tkgt
