#include "tkgt/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tkgt/tokenizer.hpp"

namespace tkgt {

namespace {

using nlohmann::json;

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

std::vector<RawQuad> read_quad_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("quad file: cannot read " + path);
  std::vector<RawQuad> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto f = split_tabs(line);
    if (f.size() != 4 || f[0].empty() || f[1].empty() || f[2].empty() || f[3].empty())
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected subject<TAB>predicate<TAB>object<TAB>timestamp");
    try {
      parse_time_key(f[3]);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back({f[0], f[1], f[2], f[3]});
  }
  return out;
}

namespace {

std::vector<Quadruple> index_raw(const std::vector<RawQuad>& raw, Vocabulary& vocab) {
  std::vector<Quadruple> quads;
  quads.reserve(raw.size());
  for (const auto& r : raw) {
    Quadruple q;
    q.subj = vocab.add_entity(r.subj);
    q.pred = vocab.add_predicate(r.pred);
    q.obj = vocab.add_entity(r.obj);
    int t = vocab.time_index(parse_time_key(r.time));
    if (t < 0) throw std::runtime_error("quad file: timestamp not indexed: " + r.time);
    q.time = t;
    quads.push_back(q);
  }
  return quads;
}

}  // namespace

std::vector<Quadruple> load_quadruples(const std::string& path, Vocabulary& vocab) {
  auto raw = read_quad_file(path);
  std::vector<std::string> times = vocab.time_raw;
  for (const auto& r : raw) times.push_back(r.time);
  vocab.index_timestamps(times);
  return index_raw(raw, vocab);
}

DatasetSplit load_dataset(const std::string& train_path, const std::string& valid_path,
                          const std::string& test_path, Vocabulary& vocab) {
  std::vector<RawQuad> train, valid, test;
  if (!train_path.empty()) train = read_quad_file(train_path);
  if (!valid_path.empty()) valid = read_quad_file(valid_path);
  if (!test_path.empty()) test = read_quad_file(test_path);

  std::vector<std::string> times = vocab.time_raw;
  for (const auto* part : {&train, &valid, &test})
    for (const auto& r : *part) times.push_back(r.time);
  vocab.index_timestamps(times);

  DatasetSplit split;
  split.train = index_raw(train, vocab);
  split.valid = index_raw(valid, vocab);
  split.test = index_raw(test, vocab);
  return split;
}

void save_quadruples(const std::string& path, const std::vector<Quadruple>& quads,
                     const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("quad file: cannot write " + path);
  for (const auto& q : quads)
    out << vocab.entities[q.subj] << '\t' << vocab.predicates[q.pred] << '\t'
        << vocab.entities[q.obj] << '\t' << vocab.time_raw[q.time] << '\n';
  if (!out) throw std::runtime_error("quad file: write failed for " + path);
}

void add_reciprocals(std::vector<Quadruple>& quads, Vocabulary& vocab) {
  if (vocab.has_reciprocals)
    throw std::runtime_error("add_reciprocals: vocabulary already augmented");
  vocab.base_predicates = vocab.n_predicates();
  vocab.has_reciprocals = true;
  for (std::size_t i = 0; i < vocab.base_predicates; ++i)
    vocab.add_predicate(vocab.predicates[i] + "^-1");
  std::size_t n = quads.size();
  quads.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) quads.push_back(reciprocal_of(quads[i], vocab));
}

std::vector<Document> read_documents_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("documents: cannot read " + path);
  std::vector<Document> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
    }
    if (!j.contains("timestamp") || !j.contains("text"))
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": record needs fields timestamp, text");
    docs.push_back({j["timestamp"].get<std::string>(), j["text"].get<std::string>()});
  }
  return docs;
}

namespace {

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '\n') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
      continue;
    }
    cur += c;
    if ((c == '.' || c == '!' || c == '?') &&
        (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

bool word_char(unsigned char c) { return std::isalnum(c) != 0; }

// Case-insensitive whole-word substring containment. Boundaries are any
// non-alphanumeric bytes, so multi-word labels and CJK text both match.
bool contains_mention(const std::string& hay_lower, const std::string& needle_lower) {
  if (needle_lower.empty()) return false;
  std::size_t pos = 0;
  while ((pos = hay_lower.find(needle_lower, pos)) != std::string::npos) {
    bool left_ok = pos == 0 || !word_char(static_cast<unsigned char>(hay_lower[pos - 1]));
    std::size_t end = pos + needle_lower.size();
    bool right_ok = end == hay_lower.size() || !word_char(static_cast<unsigned char>(hay_lower[end]));
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

}  // namespace

std::vector<AlignedSample> pair_distant(const std::vector<Quadruple>& quads,
                                        const std::vector<Document>& docs,
                                        const std::unordered_map<int, std::string>& surface_forms,
                                        const Vocabulary& vocab, std::size_t max_text_tokens,
                                        PairStats* stats) {
  PairStats local;
  // Quadruples eligible for pairing, grouped by time index.
  std::unordered_map<int, std::vector<std::size_t>> by_time;
  std::vector<char> matched(quads.size(), 0);
  for (std::size_t i = 0; i < quads.size(); ++i) {
    auto s = surface_forms.find(quads[i].subj);
    auto o = surface_forms.find(quads[i].obj);
    if (s == surface_forms.end() || s->second.empty() || o == surface_forms.end() ||
        o->second.empty()) {
      ++local.quads_skipped_no_surface;
      continue;
    }
    by_time[quads[i].time].push_back(i);
  }

  std::vector<AlignedSample> samples;
  for (const auto& doc : docs) {
    int t = vocab.time_index(parse_time_key(doc.time));
    if (t < 0) continue;
    auto it = by_time.find(t);
    if (it == by_time.end()) continue;
    for (const auto& sentence : split_sentences(doc.text)) {
      std::string low = ascii_lower(sentence);
      for (std::size_t qi : it->second) {
        const Quadruple& q = quads[qi];
        const std::string subj = ascii_lower(surface_forms.at(q.subj));
        const std::string obj = ascii_lower(surface_forms.at(q.obj));
        if (!contains_mention(low, subj) || !contains_mention(low, obj)) continue;
        auto tokens = tokenize(sentence, vocab);
        if (tokens.empty()) continue;
        if (tokens.size() > max_text_tokens) tokens.resize(max_text_tokens);
        samples.push_back({q, std::move(tokens)});
        if (!matched[qi]) {
          matched[qi] = 1;
          ++local.quads_matched;
        }
      }
    }
  }
  local.samples = samples.size();
  if (stats) *stats = local;
  return samples;
}

AlignedSample build_wiki_description_sample(const Quadruple& quad,
                                            const std::string& subj_description,
                                            const std::string& pred_label,
                                            const std::string& obj_description,
                                            const Vocabulary& vocab,
                                            std::size_t max_text_tokens) {
  auto blank = [](const std::string& s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c); });
  };
  if (subj_description.empty() || blank(subj_description))
    throw std::runtime_error("wiki sample: empty subject description");
  if (obj_description.empty() || blank(obj_description))
    throw std::runtime_error("wiki sample: empty object description");
  if (pred_label.empty() || blank(pred_label))
    throw std::runtime_error("wiki sample: empty predicate label");

  AlignedSample s;
  s.quad = quad;
  for (const std::string* part : {&subj_description, &pred_label, &obj_description}) {
    auto t = tokenize(*part, vocab);
    s.tokens.insert(s.tokens.end(), t.begin(), t.end());
  }
  if (s.tokens.size() > max_text_tokens) s.tokens.resize(max_text_tokens);
  return s;
}

std::vector<RawAligned> read_aligned_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("aligned file: cannot read " + path);
  std::vector<RawAligned> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
    }
    for (const char* field : {"subject", "predicate", "object", "timestamp", "text"})
      if (!j.contains(field))
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": missing field " +
                                 field);
    RawAligned r;
    r.quad = {j["subject"].get<std::string>(), j["predicate"].get<std::string>(),
              j["object"].get<std::string>(), j["timestamp"].get<std::string>()};
    r.text = j["text"].get<std::string>();
    out.push_back(std::move(r));
  }
  return out;
}

void write_aligned_jsonl(const std::string& path, const std::vector<RawAligned>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("aligned file: cannot write " + path);
  for (const auto& r : records) {
    json j;
    j["subject"] = r.quad.subj;
    j["predicate"] = r.quad.pred;
    j["object"] = r.quad.obj;
    j["timestamp"] = r.quad.time;
    j["text"] = r.text;
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("aligned file: write failed for " + path);
}

std::vector<AlignedSample> resolve_aligned(const std::vector<RawAligned>& raw,
                                           const Vocabulary& vocab,
                                           std::size_t max_text_tokens) {
  std::vector<AlignedSample> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& r = raw[i];
    auto where = [&] { return "aligned record " + std::to_string(i + 1); };
    AlignedSample s;
    int subj = vocab.entity(r.quad.subj);
    int pred = vocab.predicate(r.quad.pred);
    int obj = vocab.entity(r.quad.obj);
    if (subj < 0) throw std::runtime_error(where() + ": unknown entity " + r.quad.subj);
    if (pred < 0) throw std::runtime_error(where() + ": unknown predicate " + r.quad.pred);
    if (obj < 0) throw std::runtime_error(where() + ": unknown entity " + r.quad.obj);
    int t = vocab.time_index(parse_time_key(r.quad.time));
    if (t < 0) throw std::runtime_error(where() + ": unknown timestamp " + r.quad.time);
    s.quad = {subj, pred, obj, t};
    s.tokens = tokenize(r.text, vocab);
    if (s.tokens.empty())
      throw std::runtime_error(where() + ": text tokenizes to nothing");
    if (s.tokens.size() > max_text_tokens) s.tokens.resize(max_text_tokens);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace tkgt
