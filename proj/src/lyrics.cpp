// SPDX-License-Identifier: Apache-2.0
#include "genre/lyrics.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "genre/error.hpp"

namespace genre {

namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_word_char(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(static_cast<unsigned char>(line[j]))) ++j;
    std::size_t b = i, e = j;
    while (b < e && !is_word_char(static_cast<unsigned char>(line[b]))) ++b;
    while (e > b && !is_word_char(static_cast<unsigned char>(line[e - 1]))) --e;
    if (b < e) {
      std::string tok(line.substr(b, e - b));
      for (char& c : tok)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      out.push_back(std::move(tok));
    }
    i = j;
  }
  return out;
}

std::vector<Sentence> segment_sentences(std::string_view lyrics) {
  std::vector<Sentence> out;
  std::size_t start = 0;
  while (start <= lyrics.size()) {
    std::size_t end = lyrics.find('\n', start);
    if (end == std::string_view::npos) end = lyrics.size();
    auto tokens = tokenize(lyrics.substr(start, end - start));
    if (!tokens.empty()) out.push_back({std::move(tokens)});
    start = end + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocab

Vocab::Vocab() : tokens_{std::string(kPadToken), std::string(kUnkToken)} {
  index_.emplace(tokens_[0], kPad);
  index_.emplace(tokens_[1], kUnk);
}

Vocab Vocab::build(std::span<const Sentence> corpus, std::size_t min_count) {
  if (min_count == 0) throw ParameterError("vocabulary min_count must be at least 1");
  std::map<std::string, std::size_t> counts;
  for (const Sentence& s : corpus)
    for (const std::string& t : s.tokens) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts)
    if (n >= min_count) kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return from_tokens(std::move(tokens));
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab v;
  for (std::string& t : tokens) {
    if (t.empty()) throw FormatError("vocabulary: empty token");
    const int id = static_cast<int>(v.tokens_.size());
    if (!v.index_.emplace(t, id).second) throw FormatError("vocabulary: duplicate token '" + t + "'");
    v.tokens_.push_back(std::move(t));
  }
  return v;
}

int Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end() || it->second < 2) return kUnk;
  return it->second;
}

bool Vocab::contains(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it != index_.end() && it->second >= 2;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DimensionError("vocabulary id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::string Vocab::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out += tokens_[i];
    out += '\t';
    out += std::to_string(i);
    out += '\n';
  }
  return out;
}

Vocab Vocab::parse(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t line_no = 0, start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw FormatError("vocabulary line " + std::to_string(line_no) + ": missing tab");
    }
    const std::string tok(line.substr(0, tab));
    long id = -1;
    try {
      id = std::stol(std::string(line.substr(tab + 1)));
    } catch (const std::exception&) {
      throw FormatError("vocabulary line " + std::to_string(line_no) + ": bad id");
    }
    const long expected = static_cast<long>(line_no) - 1;
    if (id != expected) {
      throw FormatError("vocabulary line " + std::to_string(line_no) + ": id " + std::to_string(id) +
                        " out of sequence");
    }
    if (id < 2) {
      if (tok != (id == 0 ? kPadToken : kUnkToken)) {
        throw FormatError("vocabulary line " + std::to_string(line_no) + ": reserved id mismatch");
      }
      continue;
    }
    tokens.push_back(tok);
  }
  return from_tokens(std::move(tokens));
}

// ---------------------------------------------------------------------------
// Token grids

std::size_t TokenGrid::sentence_count() const {
  return static_cast<std::size_t>(std::count(sent_mask.begin(), sent_mask.end(), 1));
}

void TokenGrid::validate() const {
  const std::size_t cells = max_sentences * max_words;
  if (ids.size() != cells || word_mask.size() != cells || sent_mask.size() != max_sentences) {
    throw ContractError("token grid: buffers do not match " + std::to_string(max_sentences) + "x" +
                        std::to_string(max_words));
  }
  for (std::size_t s = 0; s < max_sentences; ++s) {
    bool any = false;
    for (std::size_t w = 0; w < max_words; ++w) {
      const bool real_word = id(s, w) != Vocab::kPad;
      if (id(s, w) < 0) throw ContractError("token grid: negative id");
      if (real_word != has_word(s, w)) {
        throw ContractError("token grid: word mask disagrees with ids at (" + std::to_string(s) +
                            ", " + std::to_string(w) + ")");
      }
      any = any || real_word;
    }
    if (any != has_sentence(s)) {
      throw ContractError("token grid: sentence mask disagrees with row " + std::to_string(s));
    }
  }
}

TokenGrid encode_and_pad(std::span<const Sentence> sentences, const Vocab& vocab,
                         std::size_t max_sentences, std::size_t max_words) {
  TokenGrid g;
  g.max_sentences = max_sentences;
  g.max_words = max_words;
  g.ids.assign(max_sentences * max_words, Vocab::kPad);
  g.word_mask.assign(max_sentences * max_words, 0);
  g.sent_mask.assign(max_sentences, 0);
  const std::size_t rows = std::min(sentences.size(), max_sentences);
  for (std::size_t s = 0; s < rows; ++s) {
    const auto& tokens = sentences[s].tokens;
    const std::size_t cols = std::min(tokens.size(), max_words);
    for (std::size_t w = 0; w < cols; ++w) {
      g.ids[s * max_words + w] = vocab.id(tokens[w]);
      g.word_mask[s * max_words + w] = 1;
    }
    g.sent_mask[s] = cols > 0 ? 1 : 0;
  }
  return g;
}

TokenGrid encode_lyrics(std::string_view lyrics, const Vocab& vocab, std::size_t max_sentences,
                        std::size_t max_words) {
  const auto sentences = segment_sentences(lyrics);
  return encode_and_pad(sentences, vocab, max_sentences, max_words);
}

}  // namespace genre
