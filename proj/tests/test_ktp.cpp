#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tkgt/grad_check.hpp"
#include "tkgt/ktp.hpp"

using namespace tkgt;

namespace {

struct Fixture {
  ParamStore<double> store;
  TkgeModel<double> tkge;
  EncoderModel<double> enc;
  SpaceSizes sizes;

  Fixture(ModelKind kind = ModelKind::kDe, std::size_t e = 5, std::size_t r = 3,
          std::size_t t = 6, std::size_t d = 8, std::size_t layers = 1, std::size_t heads = 2,
          std::size_t maxlen = 24, std::size_t n_subwords = 17, std::uint64_t seed = 13) {
    Rng rng(seed);
    tkge.kind = kind;
    tkge.dims = {e, r, t, d, 0.5};
    tkge.allocate(store, rng);
    enc.dims = {d, layers, heads, maxlen, n_subwords, t};
    enc.allocate(store, rng);
    sizes = {n_subwords, e, r, t};
  }

  AlignedSample sample(std::size_t n_tokens = 4) const {
    AlignedSample s;
    s.quad = {1, 0, 3, 2};
    for (std::size_t i = 0; i < n_tokens; ++i)
      s.tokens.push_back(kNumSpecials + static_cast<int>((i * 3) % 7));
    return s;
  }
};

bool knowledge_pos(std::size_t p) { return p == kPosSubj || p == kPosPred || p == kPosObj; }

}  // namespace

TEST_CASE("either-entity-or-predicate masking masks exactly one knowledge token") {
  Fixture f;
  MaskingConfig cfg;  // default e_or_r_plus_w
  auto input = build_input(f.sample(6), 24);
  Rng rng(55);
  for (int i = 0; i < 5000; ++i) {
    auto m = mask_sample(input, cfg, f.sizes, rng);
    int knowledge = 0;
    bool entity = false, predicate = false;
    for (const auto& l : m.labels) {
      REQUIRE(m.input.slots[l.position].masked());
      if (knowledge_pos(l.position)) {
        ++knowledge;
        entity |= l.space == kTypeEntity;
        predicate |= l.space == kTypePredicate;
      }
    }
    CHECK(knowledge == 1);
    CHECK(!(entity && predicate));
  }
}

TEST_CASE("one-of-three masking never mixes token categories") {
  Fixture f;
  MaskingConfig cfg;
  cfg.strategy = MaskingStrategy::kOneOfErw;
  auto input = build_input(f.sample(6), 24);
  Rng rng(56);
  for (int i = 0; i < 5000; ++i) {
    auto m = mask_sample(input, cfg, f.sizes, rng);
    bool has_sub = false, has_ent = false, has_pred = false;
    for (const auto& l : m.labels) {
      has_sub |= l.space == kTypeSubword;
      has_ent |= l.space == kTypeEntity;
      has_pred |= l.space == kTypePredicate;
    }
    CHECK(static_cast<int>(has_sub) + static_cast<int>(has_ent) + static_cast<int>(has_pred) <= 1);
  }
}

TEST_CASE("joint masking can mask all knowledge slots at once") {
  Fixture f;
  MaskingConfig cfg;
  cfg.strategy = MaskingStrategy::kJointErw;
  auto input = build_input(f.sample(6), 24);
  Rng rng(57);
  bool saw_all_three = false;
  for (int i = 0; i < 20000 && !saw_all_three; ++i) {
    auto m = mask_sample(input, cfg, f.sizes, rng);
    int knowledge = 0;
    for (const auto& l : m.labels)
      if (knowledge_pos(l.position)) ++knowledge;
    saw_all_three = knowledge == 3;
  }
  CHECK(saw_all_three);
}

TEST_CASE("knowledge masking still applies to text-free samples") {
  Fixture f;
  MaskingConfig cfg;
  auto input = build_input(f.sample(0), 24);
  Rng rng(58);
  auto m = mask_sample(input, cfg, f.sizes, rng);
  REQUIRE(m.labels.size() == 1);
  CHECK(knowledge_pos(m.labels[0].position));
}

TEST_CASE("masking statistics approach the configured rates") {
  Fixture f;
  MaskingConfig cfg;
  cfg.mask_time = true;
  auto input = build_input(f.sample(8), 24);
  Rng rng(59);
  std::size_t subword_positions = 0, subword_masked = 0, time_masked = 0;
  std::size_t masked_total = 0, became_mask = 0, became_random = 0, kept = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    auto m = mask_sample(input, cfg, f.sizes, rng);
    subword_positions += 8;
    for (const auto& l : m.labels) {
      ++masked_total;
      if (l.space == kTypeSubword) ++subword_masked;
      if (l.space == kTypeTime) ++time_masked;
      switch (l.repl) {
        case Replacement::kMaskToken: ++became_mask; break;
        case Replacement::kRandom: ++became_random; break;
        case Replacement::kKept: ++kept; break;
        default: break;
      }
    }
  }
  double sub_rate = double(subword_masked) / double(subword_positions);
  CHECK(sub_rate == doctest::Approx(0.15).epsilon(0.05));
  double time_rate = double(time_masked) / double(n);
  CHECK(time_rate == doctest::Approx(0.15).epsilon(0.05));
  CHECK(double(became_mask) / double(masked_total) == doctest::Approx(0.80).epsilon(0.02));
  CHECK(double(became_random) / double(masked_total) == doctest::Approx(0.10).epsilon(0.05));
  CHECK(double(kept) / double(masked_total) == doctest::Approx(0.10).epsilon(0.05));
}

TEST_CASE("random replacements stay in-space and avoid the original") {
  Fixture f;
  MaskingConfig cfg;
  cfg.strategy = MaskingStrategy::kJointErw;
  cfg.mask_time = true;
  auto input = build_input(f.sample(8), 24);
  Rng rng(60);
  for (int i = 0; i < 20000; ++i) {
    auto m = mask_sample(input, cfg, f.sizes, rng);
    for (const auto& l : m.labels) {
      if (l.repl != Replacement::kRandom) continue;
      const Slot& s = m.input.slots[l.position];
      CHECK(s.random_id != s.id);
      switch (l.space) {
        case kTypeEntity:
          CHECK(s.random_id >= 0);
          CHECK(s.random_id < static_cast<int>(f.sizes.entities));
          break;
        case kTypePredicate:
          CHECK(s.random_id < static_cast<int>(f.sizes.predicates));
          break;
        case kTypeTime:
          CHECK(s.random_id < static_cast<int>(f.sizes.timestamps));
          break;
        default:
          CHECK(s.random_id >= kNumSpecials);  // specials never drawn
          CHECK(s.random_id < static_cast<int>(f.sizes.subwords));
          break;
      }
    }
  }
}

TEST_CASE("masking is reproducible from the seed") {
  Fixture f;
  MaskingConfig cfg;
  auto input = build_input(f.sample(8), 24);
  for (std::uint64_t seed : {1ull, 42ull, 900ull}) {
    Rng a(seed), b(seed);
    auto ma = mask_sample(input, cfg, f.sizes, a);
    auto mb = mask_sample(input, cfg, f.sizes, b);
    REQUIRE(ma.labels.size() == mb.labels.size());
    for (std::size_t i = 0; i < ma.labels.size(); ++i) {
      CHECK(ma.labels[i].position == mb.labels[i].position);
      CHECK(ma.labels[i].repl == mb.labels[i].repl);
      CHECK(ma.input.slots[ma.labels[i].position].random_id ==
            mb.input.slots[mb.labels[i].position].random_id);
    }
  }
}

TEST_CASE("uniform logits give ln V cross entropy") {
  Fixture f;
  for (auto& t : f.store.tensors)
    for (auto& x : t.data) x = 0.0;  // zero parameters -> zero logits
  // keep layer norms meaningful
  for (std::size_t l = 0; l < f.enc.dims.layers; ++l) {
    for (auto& x : f.store[f.enc.layers[l].ln1_g].data) x = 1.0;
    for (auto& x : f.store[f.enc.layers[l].ln2_g].data) x = 1.0;
  }
  for (auto& x : f.store[f.enc.lnf_g].data) x = 1.0;

  auto input = build_input(f.sample(4), 24);
  MaskedSample m{input, {}};
  m.input.slots[kPosTextStart].repl = Replacement::kMaskToken;
  m.labels.push_back({kPosTextStart, kTypeSubword,
                      m.input.slots[kPosTextStart].id, Replacement::kMaskToken});

  Tape<double> tape;
  LeafCache<double> leaf(tape, f.store);
  auto sum = ktp_sum_tape(tape, leaf, f.tkge, f.enc, m);
  REQUIRE(sum.count == 1);
  CHECK(tape.val(sum.node).data[0] == doctest::Approx(std::log(17.0)).epsilon(1e-12));
}

TEST_CASE("loss over two masked positions is the mean of the position losses") {
  Fixture f;
  auto input = build_input(f.sample(4), 24);
  MaskedSample both{input, {}};
  both.input.slots[kPosSubj].repl = Replacement::kMaskToken;
  both.input.slots[kPosTextStart + 1].repl = Replacement::kMaskToken;
  both.labels.push_back({kPosSubj, kTypeEntity, input.slots[kPosSubj].id,
                         Replacement::kMaskToken});
  both.labels.push_back({kPosTextStart + 1, kTypeSubword, input.slots[kPosTextStart + 1].id,
                         Replacement::kMaskToken});

  Tape<double> tape;
  LeafCache<double> leaf(tape, f.store);
  auto sum = ktp_sum_tape(tape, leaf, f.tkge, f.enc, both);
  REQUIRE(sum.count == 2);

  // same masked input, one label at a time
  double parts = 0;
  for (std::size_t i = 0; i < 2; ++i) {
    MaskedSample one = both;
    one.labels = {both.labels[i]};
    Tape<double> t2;
    LeafCache<double> leaf2(t2, f.store);
    auto s = ktp_sum_tape(t2, leaf2, f.tkge, f.enc, one);
    parts += t2.val(s.node).data[0];
  }
  CHECK(tape.val(sum.node).data[0] / 2.0 == doctest::Approx(parts / 2.0).epsilon(1e-14));
}

TEST_CASE("ktp loss is invariant to label order") {
  Fixture f;
  auto input = build_input(f.sample(5), 24);
  MaskingConfig cfg;
  Rng rng(71);
  auto m = mask_sample(input, cfg, f.sizes, rng);
  REQUIRE(m.labels.size() >= 1);

  auto value_of = [&](const MaskedSample& ms) {
    Tape<double> tape;
    LeafCache<double> leaf(tape, f.store);
    auto s = ktp_sum_tape(tape, leaf, f.tkge, f.enc, ms);
    return tape.val(s.node).data[0] / double(s.count);
  };
  auto reversed = m;
  std::reverse(reversed.labels.begin(), reversed.labels.end());
  CHECK(std::abs(value_of(m) - value_of(reversed)) < 1e-12);
}

TEST_CASE("plans assemble positives, negatives, and masks from one seed") {
  Fixture f;
  JointConfig jc;
  jc.negatives = 3;
  jc.reciprocals = false;
  auto s = f.sample(4);
  auto a = plan_sample(s, jc, f.sizes, f.tkge.dims.n_entities, 24, nullptr, 777);
  auto b = plan_sample(s, jc, f.sizes, f.tkge.dims.n_entities, 24, nullptr, 777);
  CHECK(a.positives == b.positives);
  CHECK(a.negatives == b.negatives);
  CHECK(a.dropout_seed == b.dropout_seed);
  CHECK(a.positives.size() == 1);
  CHECK(a.negatives.size() == 3);
  auto c = plan_sample(s, jc, f.sizes, f.tkge.dims.n_entities, 24, nullptr, 778);
  CHECK(a.negatives != c.negatives);
}

TEST_CASE("zero lambda reduces the joint loss to the embedding loss") {
  Fixture f;
  JointConfig jc;
  jc.lambda = 0.0;
  jc.negatives = 2;
  std::vector<SamplePlan> plans;
  for (int i = 0; i < 3; ++i)
    plans.push_back(plan_sample(f.sample(3 + i), jc, f.sizes, f.tkge.dims.n_entities, 24,
                                nullptr, 100 + i));
  auto stats = joint_batch<double>(f.tkge, f.enc, f.store, plans, 0.0, 0.0, nullptr, 1);
  CHECK(stats.loss_total == stats.loss_tke);
  CHECK(stats.loss_ktp > 0.0);  // still measured, just unweighted
}

TEST_CASE("joint loss is affine in lambda") {
  Fixture f;
  JointConfig jc;
  jc.negatives = 2;
  std::vector<SamplePlan> plans;
  for (int i = 0; i < 3; ++i)
    plans.push_back(plan_sample(f.sample(3 + i), jc, f.sizes, f.tkge.dims.n_entities, 24,
                                nullptr, 200 + i));
  double l1 = 0.7, l2 = 0.2;
  auto s1 = joint_batch<double>(f.tkge, f.enc, f.store, plans, l1, 0.0, nullptr, 1);
  auto s2 = joint_batch<double>(f.tkge, f.enc, f.store, plans, l2, 0.0, nullptr, 1);
  CHECK(std::abs((s1.loss_total - s2.loss_total) - (l1 - l2) * s1.loss_ktp) < 1e-12);
  CHECK(s1.loss_ktp == s2.loss_ktp);
}

TEST_CASE("per-sample batch evaluation matches the single-tape loss and gradients") {
  Fixture f;
  JointConfig jc;
  jc.negatives = 2;
  std::vector<SamplePlan> plans;
  for (int i = 0; i < 4; ++i)
    plans.push_back(plan_sample(f.sample(2 + i), jc, f.sizes, f.tkge.dims.n_entities, 24,
                                nullptr, 300 + i));

  GradStore<double> batch_grads(f.store.size());
  auto stats = joint_batch<double>(f.tkge, f.enc, f.store, plans, 0.3, 0.0, &batch_grads, 1);

  Tape<double> tape;
  LeafCache<double> leaf(tape, f.store);
  auto loss = joint_loss_tape(tape, leaf, f.tkge, f.enc, plans, 0.3);
  GradStore<double> tape_grads(f.store.size());
  tape.backward(loss, tape_grads);

  CHECK(std::abs(stats.loss_total - tape.val(loss).data[0]) < 1e-12);
  for (std::size_t pid = 0; pid < f.store.size(); ++pid) {
    REQUIRE(batch_grads.touched(pid) == tape_grads.touched(pid));
    if (!batch_grads.touched(pid)) continue;
    for (std::size_t k = 0; k < batch_grads.g[pid].numel(); ++k)
      CHECK(std::abs(batch_grads.g[pid].data[k] - tape_grads.g[pid].data[k]) < 1e-10);
  }
}

TEST_CASE("worker count does not change the result bitwise") {
  Fixture f;
  JointConfig jc;
  jc.negatives = 2;
  std::vector<SamplePlan> plans;
  for (int i = 0; i < 7; ++i)
    plans.push_back(plan_sample(f.sample(2 + i % 4), jc, f.sizes, f.tkge.dims.n_entities, 24,
                                nullptr, 400 + i));
  GradStore<double> g1(f.store.size()), g4(f.store.size());
  auto s1 = joint_batch<double>(f.tkge, f.enc, f.store, plans, 0.3, 0.1, &g1, 1);
  auto s4 = joint_batch<double>(f.tkge, f.enc, f.store, plans, 0.3, 0.1, &g4, 4);
  CHECK(s1.loss_total == s4.loss_total);
  CHECK(s1.loss_tke == s4.loss_tke);
  CHECK(s1.loss_ktp == s4.loss_ktp);
  for (std::size_t pid = 0; pid < f.store.size(); ++pid) {
    REQUIRE(g1.touched(pid) == g4.touched(pid));
    if (!g1.touched(pid)) continue;
    CHECK(g1.g[pid].data == g4.g[pid].data);
  }
}

TEST_CASE("joint gradients pass finite differences") {
  Fixture f(ModelKind::kDe, 4, 2, 3, 8, 1, 2, 16, 11, 31);
  JointConfig jc;
  jc.negatives = 2;
  std::vector<SamplePlan> plans;
  for (int i = 0; i < 2; ++i) {
    AlignedSample s;
    s.quad = {i, i % 2, (i + 2) % 4, i};
    s.tokens = {kNumSpecials, kNumSpecials + 2};
    plans.push_back(plan_sample(s, jc, f.sizes, f.tkge.dims.n_entities, 16, nullptr, 500 + i));
  }
  auto loss_fn = [&](Tape<double>& tape, const ParamStore<double>& ps) {
    LeafCache<double> leaf(tape, ps);
    return joint_loss_tape(tape, leaf, f.tkge, f.enc, plans, 0.3);
  };
  CHECK(grad_check(loss_fn, f.store).max_rel_err < 1e-4);
}

TEST_CASE("empty masked batches contribute zero with a warning counter") {
  Fixture f;
  JointConfig jc;
  jc.negatives = 1;
  // force a plan with no masked positions
  auto plan = plan_sample(f.sample(3), jc, f.sizes, f.tkge.dims.n_entities, 24, nullptr, 600);
  plan.masked.labels.clear();
  for (auto& s : plan.masked.input.slots) {
    s.repl = Replacement::kNone;
    s.random_id = -1;
  }
  auto stats = joint_batch<double>(f.tkge, f.enc, f.store, {plan}, 0.3, 0.0, nullptr, 1);
  CHECK(stats.loss_ktp == 0.0);
  CHECK(stats.ktp_empty_samples == 1);
  CHECK(stats.loss_total == stats.loss_tke);
}
