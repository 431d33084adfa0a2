#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace tkgt {

// Special subword tokens occupy fixed low ids.
enum SpecialToken : int { kPad = 0, kUnk = 1, kCls = 2, kSep = 3, kMaskTok = 4 };
constexpr int kNumSpecials = 5;
extern const char* const kSpecialNames[kNumSpecials];
constexpr const char* kContinuation = "##";

// Three id spaces (subwords, entities, predicates) plus a dense timestamp
// index space. Ids are dense, contiguous and bijective per space.
struct Vocabulary {
  std::vector<std::string> subwords;
  std::vector<std::string> entities;
  std::vector<std::string> predicates;

  std::unordered_map<std::string, int> subword_ids;
  std::unordered_map<std::string, int> entity_ids;
  std::unordered_map<std::string, int> predicate_ids;

  // Dense timestamp index: sorted comparable keys plus the first raw string
  // seen for each key.
  std::vector<std::int64_t> time_keys;
  std::vector<std::string> time_raw;

  bool has_reciprocals = false;
  std::size_t base_predicates = 0;  // predicate count before augmentation
  std::size_t max_subword_cp_len = 1;

  Vocabulary();

  int add_subword(const std::string& tok);
  int add_entity(const std::string& label);
  int add_predicate(const std::string& label);

  int subword(const std::string& tok) const;
  int entity(const std::string& label) const;
  int predicate(const std::string& label) const;

  std::size_t n_subwords() const { return subwords.size(); }
  std::size_t n_entities() const { return entities.size(); }
  std::size_t n_predicates() const { return predicates.size(); }
  std::size_t n_timestamps() const { return time_keys.size(); }

  // Rebuilds the dense timestamp index from a set of raw values; keys are
  // sorted so indices are chronological.
  void index_timestamps(const std::vector<std::string>& raw_values);
  int time_index(std::int64_t key) const;  // -1 when absent

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);
};

// Parses a timestamp that is either a non-negative integer or an ISO date
// (YYYY-MM-DD) into a comparable key. Throws on any other format.
std::int64_t parse_time_key(const std::string& raw);

}  // namespace tkgt
