#pragma once

#include <string>
#include <vector>

#include "tkgt/vocab.hpp"

namespace tkgt {

// Splits a UTF-8 string into code points (each returned as a byte string).
// Invalid lead bytes degrade to single-byte units.
std::vector<std::string> utf8_split(const std::string& s);

std::string ascii_lower(const std::string& s);

// Adds subword pieces to the vocabulary: every single character seen in the
// corpus (in word-initial and continuation form) plus the most frequent
// multi-character pieces up to max_size total subword entries. Pieces that
// continue a word carry the ## marker. Frequency-based rather than
// likelihood-based; matching at inference is greedy longest-match.
void build_subword_vocab(const std::vector<std::string>& corpus, std::size_t max_size,
                         Vocabulary& vocab, std::size_t max_piece_len = 8,
                         std::size_t min_freq = 2);

// Greedy longest-match tokenization, lowercased, deterministic. Characters
// outside the inventory map to [UNK] one by one.
std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab);

}  // namespace tkgt
