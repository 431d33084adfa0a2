#include "tkgt/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

#include "tkgt/tokenizer.hpp"

namespace tkgt {

const char* const kSpecialNames[kNumSpecials] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

Vocabulary::Vocabulary() {
  for (int i = 0; i < kNumSpecials; ++i) add_subword(kSpecialNames[i]);
}

int Vocabulary::add_subword(const std::string& tok) {
  auto it = subword_ids.find(tok);
  if (it != subword_ids.end()) return it->second;
  int id = static_cast<int>(subwords.size());
  subwords.push_back(tok);
  subword_ids.emplace(tok, id);
  std::string content = (tok.size() > 2 && tok.compare(0, 2, kContinuation) == 0)
                            ? tok.substr(2)
                            : tok;
  if (tok[0] != '[')  // specials never participate in greedy matching
    max_subword_cp_len = std::max(max_subword_cp_len, utf8_split(content).size());
  return id;
}

int Vocabulary::add_entity(const std::string& label) {
  auto it = entity_ids.find(label);
  if (it != entity_ids.end()) return it->second;
  int id = static_cast<int>(entities.size());
  entities.push_back(label);
  entity_ids.emplace(label, id);
  return id;
}

int Vocabulary::add_predicate(const std::string& label) {
  auto it = predicate_ids.find(label);
  if (it != predicate_ids.end()) return it->second;
  int id = static_cast<int>(predicates.size());
  predicates.push_back(label);
  predicate_ids.emplace(label, id);
  return id;
}

int Vocabulary::subword(const std::string& tok) const {
  auto it = subword_ids.find(tok);
  return it == subword_ids.end() ? -1 : it->second;
}
int Vocabulary::entity(const std::string& label) const {
  auto it = entity_ids.find(label);
  return it == entity_ids.end() ? -1 : it->second;
}
int Vocabulary::predicate(const std::string& label) const {
  auto it = predicate_ids.find(label);
  return it == predicate_ids.end() ? -1 : it->second;
}

void Vocabulary::index_timestamps(const std::vector<std::string>& raw_values) {
  std::vector<std::pair<std::int64_t, std::string>> keyed;
  keyed.reserve(raw_values.size());
  for (const auto& r : raw_values) keyed.emplace_back(parse_time_key(r), r);
  std::sort(keyed.begin(), keyed.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  time_keys.clear();
  time_raw.clear();
  for (const auto& [k, r] : keyed) {
    if (!time_keys.empty() && time_keys.back() == k) continue;
    time_keys.push_back(k);
    time_raw.push_back(r);
  }
}

int Vocabulary::time_index(std::int64_t key) const {
  auto it = std::lower_bound(time_keys.begin(), time_keys.end(), key);
  if (it == time_keys.end() || *it != key) return -1;
  return static_cast<int>(it - time_keys.begin());
}

std::int64_t parse_time_key(const std::string& raw) {
  if (raw.empty()) throw std::runtime_error("timestamp: empty value");
  bool digits = std::all_of(raw.begin(), raw.end(),
                            [](unsigned char c) { return std::isdigit(c); });
  if (digits) {
    try {
      return std::stoll(raw);
    } catch (const std::exception&) {
      throw std::runtime_error("timestamp: integer out of range: " + raw);
    }
  }
  // ISO date YYYY-MM-DD
  if (raw.size() == 10 && raw[4] == '-' && raw[7] == '-') {
    auto num = [&](int from, int len) {
      for (int i = from; i < from + len; ++i)
        if (!std::isdigit(static_cast<unsigned char>(raw[i])))
          throw std::runtime_error("timestamp: unknown format: " + raw);
      return std::stoi(raw.substr(from, len));
    };
    int y = num(0, 4), m = num(5, 2), d = num(8, 2);
    if (m < 1 || m > 12 || d < 1 || d > 31)
      throw std::runtime_error("timestamp: invalid date: " + raw);
    return static_cast<std::int64_t>(y) * 10000 + m * 100 + d;
  }
  throw std::runtime_error("timestamp: unknown format: " + raw);
}

namespace {
constexpr const char* kSectionSep = "#---";

void write_section(std::ofstream& out, const std::vector<std::string>& items) {
  for (const auto& s : items) out << s << '\n';
}
}  // namespace

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("vocab: cannot write " + path);
  write_section(out, subwords);
  out << kSectionSep << '\n';
  write_section(out, entities);
  out << kSectionSep << '\n';
  write_section(out, predicates);
  if (!out) throw std::runtime_error("vocab: write failed for " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("vocab: cannot read " + path);
  Vocabulary v;
  v.subwords.clear();
  v.subword_ids.clear();
  int section = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line == kSectionSep) {
      ++section;
      if (section > 2) throw std::runtime_error("vocab: too many sections in " + path);
      continue;
    }
    switch (section) {
      case 0: v.add_subword(line); break;
      case 1: v.add_entity(line); break;
      default: v.add_predicate(line); break;
    }
  }
  if (section != 2) throw std::runtime_error("vocab: expected three sections in " + path);
  for (int i = 0; i < kNumSpecials && i < static_cast<int>(v.subwords.size()); ++i)
    if (v.subwords[i] != kSpecialNames[i])
      throw std::runtime_error("vocab: special token table corrupt in " + path);
  if (v.subwords.size() < kNumSpecials)
    throw std::runtime_error("vocab: special token table corrupt in " + path);
  return v;
}

}  // namespace tkgt
