#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tkgt/vocab.hpp"

namespace tkgt {

// The atomic fact: a timestamped, labeled edge.
struct Quadruple {
  std::int32_t subj = 0;
  std::int32_t pred = 0;
  std::int32_t obj = 0;
  std::int32_t time = 0;

  friend bool operator==(const Quadruple&, const Quadruple&) = default;
};

// Packs a quadruple into one key for hashed membership tests.
inline std::uint64_t quad_key(const Quadruple& q) {
  return (static_cast<std::uint64_t>(static_cast<std::uint16_t>(q.subj)) << 48) |
         (static_cast<std::uint64_t>(static_cast<std::uint16_t>(q.pred)) << 32) |
         (static_cast<std::uint64_t>(static_cast<std::uint16_t>(q.obj)) << 16) |
         static_cast<std::uint64_t>(static_cast<std::uint16_t>(q.time));
}

using QuadSet = std::unordered_set<std::uint64_t>;

inline QuadSet make_quad_set(const std::vector<const std::vector<Quadruple>*>& lists) {
  QuadSet set;
  for (const auto* l : lists)
    for (const auto& q : *l) set.insert(quad_key(q));
  return set;
}

// A quadruple paired with a tokenized textual description; the joint
// training unit. Tokens are truncated to the configured maximum, never
// padded here.
struct AlignedSample {
  Quadruple quad;
  std::vector<int> tokens;
};

struct DatasetSplit {
  std::vector<Quadruple> train, valid, test;
  std::vector<AlignedSample> aligned;  // references train quadruples only
};

// One record of a raw quadruple file: subject<TAB>predicate<TAB>object<TAB>timestamp.
struct RawQuad {
  std::string subj, pred, obj, time;
};

std::vector<RawQuad> read_quad_file(const std::string& path);

// Single-file load: entities/predicates get ids in first-appearance order,
// timestamps are indexed chronologically over this file merged with any keys
// already registered in the vocabulary.
std::vector<Quadruple> load_quadruples(const std::string& path, Vocabulary& vocab);

// Multi-file load with one shared vocabulary; the timestamp index covers all
// files so indices are stable across splits. Empty paths yield empty splits.
DatasetSplit load_dataset(const std::string& train_path, const std::string& valid_path,
                          const std::string& test_path, Vocabulary& vocab);

void save_quadruples(const std::string& path, const std::vector<Quadruple>& quads,
                     const Vocabulary& vocab);

// Appends (o, p^-1, s, t) for every (s, p, o, t); predicate count doubles and
// inverse ids are original id + original predicate count. Rejected when the
// vocabulary was already augmented.
void add_reciprocals(std::vector<Quadruple>& quads, Vocabulary& vocab);

inline Quadruple reciprocal_of(const Quadruple& q, const Vocabulary& vocab) {
  return {q.obj, static_cast<std::int32_t>(q.pred + vocab.base_predicates), q.subj, q.time};
}

struct Document {
  std::string time;  // link key, same formats as the quadruple file
  std::string text;
};

std::vector<Document> read_documents_jsonl(const std::string& path);

struct PairStats {
  std::size_t quads_matched = 0;
  std::size_t quads_skipped_no_surface = 0;
  std::size_t samples = 0;
};

// Distant-supervision pairing: every sentence of a same-timestamp document
// that mentions both the subject and the object surface forms (whole-word,
// case-insensitive) yields one aligned sample for that quadruple.
std::vector<AlignedSample> pair_distant(const std::vector<Quadruple>& quads,
                                        const std::vector<Document>& docs,
                                        const std::unordered_map<int, std::string>& surface_forms,
                                        const Vocabulary& vocab, std::size_t max_text_tokens,
                                        PairStats* stats = nullptr);

// Wiki-style sample: subject description ++ predicate label ++ object
// description, truncated to max_text_tokens.
AlignedSample build_wiki_description_sample(const Quadruple& quad,
                                            const std::string& subj_description,
                                            const std::string& pred_label,
                                            const std::string& obj_description,
                                            const Vocabulary& vocab,
                                            std::size_t max_text_tokens);

// Aligned-text JSON-lines file: one record per line with string fields
// subject, predicate, object, timestamp, text.
struct RawAligned {
  RawQuad quad;
  std::string text;
};

std::vector<RawAligned> read_aligned_jsonl(const std::string& path);
void write_aligned_jsonl(const std::string& path, const std::vector<RawAligned>& records);

// Resolves raw aligned records against the vocabulary, tokenizing the text.
// Unknown labels or timestamps are an error naming the record index.
std::vector<AlignedSample> resolve_aligned(const std::vector<RawAligned>& raw,
                                           const Vocabulary& vocab,
                                           std::size_t max_text_tokens);

}  // namespace tkgt
