// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <regex>
#include <sstream>

#include "genre/embeddings.hpp"
#include "genre/error.hpp"
#include "genre/lyrics.hpp"
#include "support.hpp"

using namespace genre;
using Tokens = std::vector<std::string>;

namespace {

std::vector<Sentence> sentences(std::initializer_list<Tokens> rows) {
  std::vector<Sentence> out;
  for (const auto& r : rows) out.push_back({r});
  return out;
}

}  // namespace

TEST(Tokenize, PunctuationStripped) { EXPECT_EQ(tokenize("Hello, World!"), (Tokens{"hello", "world"})); }

TEST(Tokenize, InnerApostropheKept) { EXPECT_EQ(tokenize("don't stop"), (Tokens{"don't", "stop"})); }

TEST(Tokenize, PurePunctuationDropped) { EXPECT_EQ(tokenize(" -- ... ?! a "), (Tokens{"a"})); }

TEST(Tokenize, Utf8LettersSurvive) { EXPECT_EQ(tokenize("Caf\xc3\xa9!"), (Tokens{"caf\xc3\xa9"})); }

TEST(Tokenize, TokenCountMatchesRegexOracle) {
  const std::string alphabet = "abcXYZ019 ,.!?'-\t";
  const std::regex word_char("[A-Za-z0-9]");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto gen = oracle::make_gen(seed);
    std::string text;
    for (int i = 0; i < 400; ++i) text += alphabet[oracle::random_size(gen, 0, alphabet.size() - 1)];
    std::istringstream chunks(text);
    std::string chunk;
    std::size_t expect = 0;
    while (chunks >> chunk) expect += std::regex_search(chunk, word_char) ? 1 : 0;
    EXPECT_EQ(tokenize(text).size(), expect) << "seed " << seed;
  }
}

TEST(Segment, Direct) {
  const auto s = segment_sentences("hello world\n\nbye");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].tokens, (Tokens{"hello", "world"}));
  EXPECT_EQ(s[1].tokens, (Tokens{"bye"}));
}

TEST(Segment, Empty) { EXPECT_TRUE(segment_sentences("").empty()); }

TEST(Segment, CrLf) { EXPECT_EQ(segment_sentences("a b\r\nc\r\n").size(), 2u); }

TEST(Segment, StressLineCount) {
  auto gen = oracle::make_gen(7);
  std::string text;
  std::size_t expect = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t kind = oracle::random_size(gen, 0, 3);
    if (kind == 0) {
      text += "   \n";  // blank
    } else if (kind == 1) {
      text += "!!\n";  // no token
    } else {
      text += "line " + std::to_string(i) + "\n";
      ++expect;
    }
  }
  EXPECT_EQ(segment_sentences(text).size(), expect);
}

TEST(Vocab, Threshold) {
  const auto corpus = sentences({{"a", "b", "a"}, {"a"}});
  const Vocab v = Vocab::build(corpus, 2);
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(v.id("a"), 2);
  EXPECT_EQ(v.id("b"), Vocab::kUnk);
}

TEST(Vocab, FrequencyThenLexicographic) {
  const auto corpus = sentences({{"z", "y", "x", "y"}, {"w", "x"}});
  const Vocab v = Vocab::build(corpus, 1);
  EXPECT_EQ(v.real_tokens(), (Tokens{"x", "y", "w", "z"}));
  EXPECT_EQ(v.token(0), "<pad>");
  EXPECT_EQ(v.token(1), "<unk>");
}

TEST(Vocab, SerializationStableAndParsable) {
  const auto corpus = sentences({{"b", "a", "c", "a"}, {"c", "d"}});
  const Vocab a = Vocab::build(corpus), b = Vocab::build(corpus);
  EXPECT_EQ(a.serialize(), b.serialize());
  EXPECT_EQ(a.serialize().substr(0, 15), "<pad>\t0\n<unk>\t1");
  const Vocab back = Vocab::parse(a.serialize());
  EXPECT_EQ(back.serialize(), a.serialize());
}

TEST(Vocab, ParseRejectsGaps) { EXPECT_THROW(Vocab::parse("<pad>\t0\n<unk>\t1\nx\t3\n"), FormatError); }

TEST(EncodeAndPad, EmptyLyrics) {
  const TokenGrid g = encode_and_pad({}, Vocab());
  EXPECT_EQ(g.ids.size(), 50u * 20u);
  EXPECT_TRUE(g.empty());
  for (int id : g.ids) EXPECT_EQ(id, Vocab::kPad);
  for (auto m : g.sent_mask) EXPECT_EQ(m, 0);
}

TEST(EncodeAndPad, SingleSentence) {
  const auto corpus = sentences({{"one", "two", "three"}});
  const Vocab v = Vocab::build(corpus);
  const TokenGrid g = encode_and_pad(corpus, v);
  for (std::size_t w = 0; w < 20; ++w) {
    EXPECT_EQ(g.has_word(0, w), w < 3);
    if (w < 3) EXPECT_EQ(g.id(0, w), v.id(corpus[0].tokens[w]));
  }
  EXPECT_TRUE(g.has_sentence(0));
  for (std::size_t s = 1; s < 50; ++s) EXPECT_FALSE(g.has_sentence(s));
  EXPECT_NO_THROW(g.validate());
}

TEST(EncodeAndPad, TruncationMatchesSlicingOracle) {
  std::vector<Sentence> input;
  std::vector<Sentence> corpus;
  for (int s = 0; s < 60; ++s) {
    Sentence sent;
    for (int w = 0; w < 25; ++w) sent.tokens.push_back("w" + std::to_string((s * 7 + w * 3) % 40));
    input.push_back(sent);
  }
  const Vocab v = Vocab::build(input);
  const TokenGrid g = encode_and_pad(input, v);
  ASSERT_EQ(g.max_sentences, 50u);
  ASSERT_EQ(g.max_words, 20u);
  for (std::size_t s = 0; s < 50; ++s)
    for (std::size_t w = 0; w < 20; ++w) EXPECT_EQ(g.id(s, w), v.id(input[s].tokens[w]));
  EXPECT_EQ(g.sentence_count(), 50u);
}

TEST(EncodeAndPad, UnknownWordsMapToUnk) {
  const Vocab v = Vocab::build(sentences({{"known"}}));
  const TokenGrid g = encode_lyrics("known stranger", v);
  EXPECT_EQ(g.id(0, 0), 2);
  EXPECT_EQ(g.id(0, 1), Vocab::kUnk);
  EXPECT_TRUE(g.has_word(0, 1));
}

TEST(TokenGrid, ValidateCatchesBrokenMask) {
  const Vocab v = Vocab::build(sentences({{"a"}}));
  TokenGrid g = encode_lyrics("a", v);
  g.word_mask[1] = 1;
  EXPECT_THROW(g.validate(), ContractError);
}

// Embeddings ------------------------------------------------------------------

namespace {

const char* kEmbeddingText =
    "3 4\n"
    "hello 0.5 -1.25 2 0.125\n"
    "world 1 2 3 4\n"
    "unused 9 9 9 9\n";

}  // namespace

TEST(Embeddings, CopiesFileVectors) {
  const Vocab v = Vocab::build(sentences({{"hello", "world", "hello", "missing"}}));
  Rng rng(1);
  const auto e = parse_embeddings(kEmbeddingText, v, rng, 4);
  const auto d = e.table.data();
  const int h = v.id("hello");
  EXPECT_EQ(std::vector<real>(d.begin() + h * 4, d.begin() + h * 4 + 4), (std::vector<real>{0.5, -1.25, 2, 0.125}));
  const int w = v.id("world");
  EXPECT_EQ(std::vector<real>(d.begin() + w * 4, d.begin() + w * 4 + 4), (std::vector<real>{1, 2, 3, 4}));
  EXPECT_EQ(e.found, 2u);
  EXPECT_EQ(e.missing, 2u);  // UNK and "missing"
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(d[i], 0.0);
  for (std::size_t i = 4; i < 8; ++i) {
    EXPECT_GE(d[i], -0.25);
    EXPECT_LT(d[i], 0.25);
  }
}

TEST(Embeddings, SeedAffectsOnlyMissingRows) {
  const Vocab v = Vocab::build(sentences({{"hello", "world", "missing"}}));
  Rng r1(1), r1b(1), r2(2);
  const auto a = parse_embeddings(kEmbeddingText, v, r1, 4);
  const auto b = parse_embeddings(kEmbeddingText, v, r1b, 4);
  const auto c = parse_embeddings(kEmbeddingText, v, r2, 4);
  EXPECT_EQ(oracle::to_vec(a.table), oracle::to_vec(b.table));
  const auto da = a.table.data(), dc = c.table.data();
  for (std::size_t id = 0; id < v.size(); ++id) {
    const bool random_row = id == static_cast<std::size_t>(Vocab::kUnk) || v.token(static_cast<int>(id)) == "missing";
    bool same = true;
    for (std::size_t j = 0; j < 4; ++j) same = same && da[id * 4 + j] == dc[id * 4 + j];
    EXPECT_EQ(same, !random_row) << v.token(static_cast<int>(id));
  }
}

TEST(Embeddings, DimensionMismatch) {
  const Vocab v;
  Rng rng(1);
  try {
    parse_embeddings("1 5\na 1 2 3 4 5\n", v, rng, 4);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
  }
}

TEST(Embeddings, MalformedLineReportsLineNumber) {
  const Vocab v;
  Rng rng(1);
  try {
    parse_embeddings("2 2\na 1 2\nb 1 x\n", v, rng, 2);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Embeddings, TrainableFlag) {
  const Vocab v = Vocab::build(sentences({{"a"}}));
  Rng rng(1);
  EXPECT_TRUE(random_embeddings(v, 3, rng, true).table.requires_grad());
  EXPECT_FALSE(random_embeddings(v, 3, rng, false).table.requires_grad());
}
