#include "tkgt/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tkgt {

std::vector<std::string> utf8_split(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if ((c & 0x80) == 0x00) len = 1;
    else if ((c & 0xE0) == 0xC0) len = 2;
    else if ((c & 0xF0) == 0xE0) len = 3;
    else if ((c & 0xF8) == 0xF0) len = 4;
    len = std::min(len, s.size() - i);
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

std::string ascii_lower(const std::string& s) {
  std::string out = s;
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

namespace {

std::vector<std::string> split_words(const std::string& line) {
  std::vector<std::string> words;
  std::istringstream iss(line);
  std::string w;
  while (iss >> w) words.push_back(w);
  return words;
}

}  // namespace

void build_subword_vocab(const std::vector<std::string>& corpus, std::size_t max_size,
                         Vocabulary& vocab, std::size_t max_piece_len, std::size_t min_freq) {
  if (corpus.empty()) throw std::runtime_error("subword vocab: empty corpus");

  std::set<std::string> chars;  // ordered for determinism
  std::map<std::string, std::size_t> pieces;
  bool any_word = false;
  for (const auto& line : corpus) {
    for (const auto& word : split_words(ascii_lower(line))) {
      any_word = true;
      auto cps = utf8_split(word);
      for (std::size_t i = 0; i < cps.size(); ++i) {
        chars.insert(cps[i]);
        std::string piece;
        for (std::size_t j = i; j < cps.size() && j - i < max_piece_len; ++j) {
          piece += cps[j];
          if (j > i)  // multi-character piece
            ++pieces[i == 0 ? piece : kContinuation + piece];
        }
      }
    }
  }
  if (!any_word) throw std::runtime_error("subword vocab: empty corpus");

  std::size_t floor_size = kNumSpecials + 2 * chars.size();
  if (max_size < floor_size)
    throw std::runtime_error("subword vocab: max_size " + std::to_string(max_size) +
                             " smaller than character inventory (" +
                             std::to_string(floor_size) + " entries needed)");

  for (const auto& c : chars) {
    vocab.add_subword(c);
    vocab.add_subword(kContinuation + c);
  }

  struct Cand {
    std::string tok;
    std::size_t freq;
    std::size_t content_len;
  };
  std::vector<Cand> cands;
  for (const auto& [tok, freq] : pieces) {
    if (freq < min_freq) continue;
    std::string content = tok.compare(0, 2, kContinuation) == 0 ? tok.substr(2) : tok;
    cands.push_back({tok, freq, utf8_split(content).size()});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.freq != b.freq) return a.freq > b.freq;
    if (a.content_len != b.content_len) return a.content_len > b.content_len;
    return a.tok < b.tok;
  });
  for (const auto& c : cands) {
    if (vocab.n_subwords() >= max_size) break;
    vocab.add_subword(c.tok);
  }
}

std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab) {
  std::vector<int> ids;
  for (const auto& word : split_words(ascii_lower(text))) {
    auto cps = utf8_split(word);
    std::size_t pos = 0;
    while (pos < cps.size()) {
      std::size_t remain = cps.size() - pos;
      std::size_t longest = std::min(remain, vocab.max_subword_cp_len);
      int found = -1;
      std::size_t used = 1;
      for (std::size_t len = longest; len >= 1; --len) {
        std::string piece;
        for (std::size_t k = 0; k < len; ++k) piece += cps[pos + k];
        if (pos > 0) piece = kContinuation + piece;
        int id = vocab.subword(piece);
        if (id >= 0) {
          found = id;
          used = len;
          break;
        }
      }
      if (found < 0) {
        ids.push_back(kUnk);
        pos += 1;
      } else {
        ids.push_back(found);
        pos += used;
      }
    }
  }
  return ids;
}

}  // namespace tkgt
