// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "genre/tensor.hpp"

namespace genre {

/// One lyric line as lowercase word tokens. Tokens are never empty.
struct Sentence {
  std::vector<std::string> tokens;
};

/// Lowercases, splits on whitespace, strips leading and trailing characters
/// that are not ASCII alphanumerics (bytes >= 0x80 count as word characters,
/// so UTF-8 letters survive) and drops empty results. Inner punctuation such
/// as the apostrophe in "don't" is kept.
std::vector<std::string> tokenize(std::string_view line);

/// Splits on line breaks (CR LF tolerated) and tokenizes each line. Lines that
/// yield no token are dropped.
std::vector<Sentence> segment_sentences(std::string_view lyrics);

/// Word <-> id table. Id 0 is padding, id 1 the unknown word; real tokens get
/// contiguous ids from 2 in descending frequency, ties in lexicographic order.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocab();

  /// Tokens occurring at least `min_count` times across all sentences.
  static Vocab build(std::span<const Sentence> corpus, std::size_t min_count = 1);
  /// Rebuilds from tokens listed in id order starting at id 2.
  static Vocab from_tokens(std::vector<std::string> tokens);

  /// UNK for unknown tokens.
  int id(std::string_view token) const;
  const std::string& token(int id) const;
  bool contains(std::string_view token) const;
  /// Number of ids including the two reserved ones.
  std::size_t size() const { return tokens_.size(); }

  /// "token<TAB>id" per line, sorted by id, reserved entries included.
  std::string serialize() const;
  static Vocab parse(std::string_view text);

  std::vector<std::string> real_tokens() const {
    return {tokens_.begin() + 2, tokens_.end()};
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Padded [max_sentences x max_words] id grid with its masks.
struct TokenGrid {
  std::size_t max_sentences = 0;
  std::size_t max_words = 0;
  std::vector<int> ids;  // row-major, PAD where unused
  Mask word_mask;        // 1 exactly where ids != PAD
  Mask sent_mask;        // 1 iff the row holds a real word

  int id(std::size_t s, std::size_t w) const { return ids[s * max_words + w]; }
  bool has_word(std::size_t s, std::size_t w) const { return word_mask[s * max_words + w] != 0; }
  bool has_sentence(std::size_t s) const { return sent_mask[s] != 0; }
  std::size_t sentence_count() const;
  bool empty() const { return sentence_count() == 0; }

  /// Throws ContractError if sizes or mask invariants do not hold.
  void validate() const;
};

inline constexpr std::size_t kDefaultMaxSentences = 50;
inline constexpr std::size_t kDefaultMaxWords = 20;

/// Keeps the first max_sentences lines and the first max_words words of each,
/// maps words through the vocabulary (unknown -> UNK) and pads with PAD.
TokenGrid encode_and_pad(std::span<const Sentence> sentences, const Vocab& vocab,
                         std::size_t max_sentences = kDefaultMaxSentences,
                         std::size_t max_words = kDefaultMaxWords);

/// segment_sentences followed by encode_and_pad.
TokenGrid encode_lyrics(std::string_view lyrics, const Vocab& vocab,
                        std::size_t max_sentences = kDefaultMaxSentences,
                        std::size_t max_words = kDefaultMaxWords);

}  // namespace genre
