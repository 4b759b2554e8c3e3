// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "genre/error.hpp"
#include "genre/gradcheck.hpp"
#include "genre/han.hpp"
#include "genre/ops.hpp"
#include "support.hpp"

using namespace genre;
using oracle::Vec;

namespace {

GruParams random_gru(std::size_t d, std::size_t h, std::mt19937_64& gen) {
  return {oracle::random_param({3 * h, d}, gen, -0.8, 0.8), oracle::random_param({3 * h, h}, gen, -0.8, 0.8),
          oracle::random_param({3 * h}, gen, -0.5, 0.5)};
}

AttentionParams random_att(std::size_t e, std::size_t a, std::mt19937_64& gen) {
  return {oracle::random_param({a, e}, gen, -0.8, 0.8), oracle::random_param({a}, gen, -0.5, 0.5),
          oracle::random_param({a}, gen, -1, 1)};
}

HanParams random_han(const HanConfig& cfg, std::mt19937_64& gen) {
  HanParams p;
  p.word_fwd = random_gru(cfg.embed_dim, cfg.hidden, gen);
  p.word_bwd = random_gru(cfg.embed_dim, cfg.hidden, gen);
  p.word_att = random_att(cfg.output_dim(), cfg.attention_dim, gen);
  p.sent_fwd = random_gru(cfg.output_dim(), cfg.hidden, gen);
  p.sent_bwd = random_gru(cfg.output_dim(), cfg.hidden, gen);
  p.sent_att = random_att(cfg.output_dim(), cfg.attention_dim, gen);
  return p;
}

std::vector<NamedTensor> han_named(const HanParams& p) {
  std::vector<NamedTensor> out;
  auto gru = [&](const std::string& n, const GruParams& g) {
    out.push_back({n + ".w", g.w});
    out.push_back({n + ".u", g.u});
    out.push_back({n + ".b", g.b});
  };
  auto att = [&](const std::string& n, const AttentionParams& a) {
    out.push_back({n + ".w", a.w});
    out.push_back({n + ".b", a.b});
    out.push_back({n + ".context", a.context});
  };
  gru("word_fwd", p.word_fwd);
  gru("word_bwd", p.word_bwd);
  att("word_att", p.word_att);
  gru("sent_fwd", p.sent_fwd);
  gru("sent_bwd", p.sent_bwd);
  att("sent_att", p.sent_att);
  return out;
}

// Grid with explicit rows of ids (0 = PAD) for a small vocabulary.
TokenGrid make_grid(std::size_t max_s, std::size_t max_w, const std::vector<std::vector<int>>& rows) {
  TokenGrid g;
  g.max_sentences = max_s;
  g.max_words = max_w;
  g.ids.assign(max_s * max_w, 0);
  g.word_mask.assign(max_s * max_w, 0);
  g.sent_mask.assign(max_s, 0);
  for (std::size_t s = 0; s < rows.size(); ++s)
    for (std::size_t w = 0; w < rows[s].size(); ++w) {
      g.ids[s * max_w + w] = rows[s][w];
      g.word_mask[s * max_w + w] = rows[s][w] != 0;
      if (rows[s][w] != 0) g.sent_mask[s] = 1;
    }
  return g;
}

Vec v(const Tensor& t) { return oracle::to_vec(t); }

// Mask-free reference: run the oracle GRU/attention on the real words only.
Vec reference_han(const TokenGrid& g, const Vec& table, const HanConfig& cfg, const HanParams& p) {
  const std::size_t d = cfg.embed_dim, h = cfg.hidden, e = cfg.output_dim(), a = cfg.attention_dim;
  Vec sentence_vectors;
  std::size_t n_sent = 0;
  for (std::size_t s = 0; s < g.max_sentences; ++s) {
    if (!g.has_sentence(s)) continue;
    Vec x;
    std::size_t len = 0;
    for (std::size_t w = 0; w < g.max_words; ++w) {
      if (!g.has_word(s, w)) continue;
      const auto id = static_cast<std::size_t>(g.id(s, w));
      x.insert(x.end(), table.begin() + id * d, table.begin() + (id + 1) * d);
      ++len;
    }
    const Vec states = oracle::bigru(x, len, d, h, v(p.word_fwd.w), v(p.word_fwd.u), v(p.word_fwd.b), v(p.word_bwd.w),
                                     v(p.word_bwd.u), v(p.word_bwd.b));
    const Vec sv = oracle::attention(states, len, e, v(p.word_att.w), v(p.word_att.b), v(p.word_att.context), a);
    sentence_vectors.insert(sentence_vectors.end(), sv.begin(), sv.end());
    ++n_sent;
  }
  const Vec states = oracle::bigru(sentence_vectors, n_sent, e, h, v(p.sent_fwd.w), v(p.sent_fwd.u), v(p.sent_fwd.b),
                                   v(p.sent_bwd.w), v(p.sent_bwd.u), v(p.sent_bwd.b));
  return oracle::attention(states, n_sent, e, v(p.sent_att.w), v(p.sent_att.b), v(p.sent_att.context), a);
}

HanConfig small_config() {
  HanConfig cfg;
  cfg.embed_dim = 5;
  cfg.hidden = 3;
  cfg.attention_dim = 4;
  return cfg;
}

}  // namespace

// gru_cell ---------------------------------------------------------------------

TEST(GruCell, ZeroFixedPoint) {
  GruParams p{Tensor::zeros({6, 4}), Tensor::zeros({6, 2}), Tensor::zeros({6})};
  auto gen = oracle::make_gen(1);
  const Tensor h = gru_cell(oracle::random_const({4}, gen), Tensor::zeros({2}), p);
  EXPECT_EQ(v(h), Vec(2, 0.0));
}

TEST(GruCell, ClosedUpdateGateCopiesState) {
  auto gen = oracle::make_gen(2);
  GruParams p = random_gru(4, 3, gen);
  Vec b = v(p.b);
  for (std::size_t i = 0; i < 3; ++i) b[i] = -50.0;
  p.b = Tensor::constant({9}, b);
  const Vec h0 = oracle::random_vec(3, gen);
  const Vec h1 = v(gru_cell(oracle::random_const({4}, gen), Tensor::constant({3}, h0), p));
  EXPECT_LT(oracle::max_abs_diff(h0, h1), 1e-15 + 1e-20);
}

TEST(GruCell, MatchesFormulaOracle) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto gen = oracle::make_gen(100 + seed);
    const std::size_t d = oracle::random_size(gen, 1, 6), h = oracle::random_size(gen, 1, 5);
    const GruParams p = random_gru(d, h, gen);
    const Vec x = oracle::random_vec(d, gen), h0 = oracle::random_vec(h, gen);
    const Vec got = v(gru_cell(Tensor::constant({d}, x), Tensor::constant({h}, h0), p));
    EXPECT_LT(oracle::max_abs_diff(got, oracle::gru_cell(x, h0, v(p.w), v(p.u), v(p.b), d, h)), 1e-12);
  }
}

TEST(GruCell, GradientCheck) {
  auto gen = oracle::make_gen(3);
  GruParams p = random_gru(4, 3, gen);
  Tensor x = oracle::random_param({2, 4}, gen), h = oracle::random_param({2, 3}, gen);
  const Tensor c = oracle::random_const({2, 3}, gen);
  const auto r = grad_check([&] { return sum(mul(gru_cell(x, h, p), c)); },
                            {{"x", x}, {"h", h}, {"w", p.w}, {"u", p.u}, {"b", p.b}});
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst_param;
}

TEST(GruCell, DimensionMismatch) {
  auto gen = oracle::make_gen(4);
  const GruParams p = random_gru(4, 3, gen);
  EXPECT_THROW(gru_cell(Tensor::zeros({5}), Tensor::zeros({3}), p), DimensionError);
}

// bigru ------------------------------------------------------------------------

TEST(Bigru, SingleStep) {
  auto gen = oracle::make_gen(5);
  const GruParams f = random_gru(3, 2, gen), b = random_gru(3, 2, gen);
  const Vec x = oracle::random_vec(3, gen);
  const Mask m{1};
  const Vec got = v(bigru(Tensor::constant({1, 3}, x), m, f, b));
  Vec expect = oracle::gru_cell(x, {0, 0}, v(f.w), v(f.u), v(f.b), 3, 2);
  const Vec back = oracle::gru_cell(x, {0, 0}, v(b.w), v(b.u), v(b.b), 3, 2);
  expect.insert(expect.end(), back.begin(), back.end());
  EXPECT_LT(oracle::max_abs_diff(got, expect), 1e-15);
}

TEST(Bigru, MaskedStepCarriesState) {
  auto gen = oracle::make_gen(6);
  const GruParams f = random_gru(3, 2, gen), b = random_gru(3, 2, gen);
  const Mask m{1, 0};
  const Vec got = v(bigru(oracle::random_const({2, 3}, gen), m, f, b));
  EXPECT_EQ(got[4], got[0]);  // forward half of step 2 equals step 1
  EXPECT_EQ(got[5], got[1]);
}

TEST(Bigru, MatchesUnrolledOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto gen = oracle::make_gen(200 + seed);
    const std::size_t d = 4, h = 3, l = 5;
    const GruParams f = random_gru(d, h, gen), b = random_gru(d, h, gen);
    const Vec x = oracle::random_vec(l * d, gen);
    const Mask m(l, 1);
    const Vec got = v(bigru(Tensor::constant({l, d}, x), m, f, b));
    const Vec expect = oracle::bigru(x, l, d, h, v(f.w), v(f.u), v(f.b), v(b.w), v(b.u), v(b.b));
    EXPECT_LT(oracle::max_abs_diff(got, expect), 1e-12);
  }
}

TEST(Bigru, AllMaskedRejected) {
  auto gen = oracle::make_gen(7);
  const GruParams f = random_gru(3, 2, gen), b = random_gru(3, 2, gen);
  const Mask m{0, 0};
  EXPECT_THROW(bigru(Tensor::zeros({2, 3}), m, f, b), ContractError);
}

// attention --------------------------------------------------------------------

TEST(Attention, SingletonIsIdentity) {
  auto gen = oracle::make_gen(8);
  const AttentionParams p = random_att(4, 3, gen);
  const Vec h = oracle::random_vec(4, gen);
  const Mask m{1};
  const auto out = attention(Tensor::constant({1, 4}, h), p, m);
  EXPECT_EQ(v(out.alpha), (Vec{1.0}));
  EXPECT_EQ(v(out.summary), h);
}

TEST(Attention, IdenticalStatesGiveUniformWeights) {
  auto gen = oracle::make_gen(9);
  const AttentionParams p = random_att(4, 3, gen);
  const Vec row = oracle::random_vec(4, gen);
  Vec h;
  for (int i = 0; i < 5; ++i) h.insert(h.end(), row.begin(), row.end());
  const Mask m{1, 1, 0, 1, 1};
  const auto out = attention(Tensor::constant({5, 4}, h), p, m);
  const Vec a = v(out.alpha);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(a[i], i == 2 ? 0.0 : 0.25, 1e-15);
  EXPECT_LT(oracle::max_abs_diff(v(out.summary), row), 1e-15);
}

TEST(Attention, MatchesFormulaOracle) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto gen = oracle::make_gen(300 + seed);
    const std::size_t n = 4, e = 6, a = 5;
    const AttentionParams p = random_att(e, a, gen);
    const Vec h = oracle::random_vec(n * e, gen);
    const Mask m(n, 1);
    const auto out = attention(Tensor::constant({n, e}, h), p, m);
    Vec alpha;
    const Vec expect = oracle::attention(h, n, e, v(p.w), v(p.b), v(p.context), a, &alpha);
    EXPECT_LT(oracle::max_abs_diff(v(out.summary), expect), 1e-10);
    EXPECT_LT(oracle::max_abs_diff(v(out.alpha), alpha), 1e-10);
  }
}

TEST(Attention, GradientCheck) {
  auto gen = oracle::make_gen(10);
  AttentionParams p = random_att(4, 3, gen);
  Tensor h = oracle::random_param({2, 3, 4}, gen);
  const Mask m{1, 1, 0, 1, 0, 1};
  const Tensor c = oracle::random_const({2, 4}, gen);
  const auto r = grad_check([&] { return sum(mul(attention(h, p, m).summary, c)); },
                            {{"h", h}, {"w", p.w}, {"b", p.b}, {"context", p.context}});
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst_param;
}

TEST(Attention, EmptySupport) {
  auto gen = oracle::make_gen(11);
  const AttentionParams p = random_att(4, 3, gen);
  const Mask m{0, 0};
  EXPECT_THROW(attention(Tensor::zeros({2, 4}), p, m), ContractError);
}

// han_forward ------------------------------------------------------------------

TEST(HanForward, DefaultWidthIs100) {
  HanConfig cfg;
  Rng rng(1);
  const HanParams p = init_han(cfg, rng);
  auto gen = oracle::make_gen(12);
  const Tensor table = oracle::random_const({6, 300}, gen);
  const TokenGrid g = make_grid(50, 20, {{2, 3, 4}, {5, 2}});
  const Tensor s = han_forward(g, table, cfg, p);
  EXPECT_EQ(s.shape(), (Shape{100}));
}

TEST(HanForward, SingletonChain) {
  const HanConfig cfg = small_config();
  auto gen = oracle::make_gen(13);
  const HanParams p = random_han(cfg, gen);
  const Vec table = oracle::random_vec(4 * 5, gen);
  const TokenGrid g = make_grid(3, 4, {{3}});
  SongAttention att;
  const Vec got = v(han_forward(g, Tensor::constant({4, 5}, table), cfg, p, &att));
  // word level: one step each way; sentence level: one step on that vector
  const Vec x(table.begin() + 15, table.end());
  Vec word = oracle::gru_cell(x, Vec(3, 0.0), v(p.word_fwd.w), v(p.word_fwd.u), v(p.word_fwd.b), 5, 3);
  const Vec wb = oracle::gru_cell(x, Vec(3, 0.0), v(p.word_bwd.w), v(p.word_bwd.u), v(p.word_bwd.b), 5, 3);
  word.insert(word.end(), wb.begin(), wb.end());
  Vec song = oracle::gru_cell(word, Vec(3, 0.0), v(p.sent_fwd.w), v(p.sent_fwd.u), v(p.sent_fwd.b), 6, 3);
  const Vec sb = oracle::gru_cell(word, Vec(3, 0.0), v(p.sent_bwd.w), v(p.sent_bwd.u), v(p.sent_bwd.b), 6, 3);
  song.insert(song.end(), sb.begin(), sb.end());
  EXPECT_LT(oracle::max_abs_diff(got, song), 1e-14);
  ASSERT_EQ(att.word_alpha.size(), 1u);
  EXPECT_EQ(att.word_alpha[0][0], 1.0);
  EXPECT_EQ(att.sentence_alpha[0], 1.0);
}

TEST(HanForward, MatchesMaskFreeReference) {
  const HanConfig cfg = small_config();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto gen = oracle::make_gen(400 + seed);
    const HanParams p = random_han(cfg, gen);
    Vec table = oracle::random_vec(9 * 5, gen);
    std::fill(table.begin(), table.begin() + 5, 0.0);
    const TokenGrid g = make_grid(6, 5, {{2, 3, 4}, {}, {5, 6, 0, 7}, {8}, {}, {2, 2, 2, 2, 2}});
    const Vec got = v(han_forward(g, Tensor::constant({9, 5}, table), cfg, p));
    EXPECT_LT(oracle::max_abs_diff(got, reference_han(g, table, cfg, p)), 1e-8) << "seed " << seed;
  }
}

TEST(HanForward, AttentionWeightsAreDistributions) {
  const HanConfig cfg = small_config();
  auto gen = oracle::make_gen(14);
  const HanParams p = random_han(cfg, gen);
  const Tensor table = oracle::random_const({9, 5}, gen);
  const TokenGrid g = make_grid(6, 5, {{2, 3, 4}, {}, {5, 6, 0, 7}, {8}});
  SongAttention att;
  han_forward(g, table, cfg, p, &att);
  ASSERT_EQ(att.sentences, (std::vector<std::size_t>{0, 2, 3}));
  for (std::size_t i = 0; i < att.sentences.size(); ++i) {
    real total = 0;
    for (std::size_t w = 0; w < 5; ++w) {
      const real a = att.word_alpha[i][w];
      EXPECT_GE(a, 0.0);
      if (!g.has_word(att.sentences[i], w)) EXPECT_EQ(a, 0.0);
      total += a;
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
  real total = 0;
  for (std::size_t s = 0; s < 6; ++s) {
    if (!g.has_sentence(s)) EXPECT_EQ(att.sentence_alpha[s], 0.0);
    total += att.sentence_alpha[s];
  }
  EXPECT_NEAR(total, 1.0, 1e-6);
}

TEST(HanForward, MaskedSentencesDoNotMatter) {
  const HanConfig cfg = small_config();
  auto gen = oracle::make_gen(15);
  const HanParams p = random_han(cfg, gen);
  const Tensor table = oracle::random_const({9, 5}, gen);
  const Vec base = v(han_forward(make_grid(6, 5, {{2, 3}, {}, {4}, {}}), table, cfg, p));
  // masked slots moved around, appended, or added to a larger grid
  EXPECT_EQ(v(han_forward(make_grid(6, 5, {{2, 3}, {4}, {}, {}}), table, cfg, p)), base);
  EXPECT_EQ(v(han_forward(make_grid(6, 5, {{}, {2, 3}, {}, {}, {4}}), table, cfg, p)), base);
  EXPECT_EQ(v(han_forward(make_grid(9, 7, {{2, 3}, {}, {}, {4}, {}, {}, {}}), table, cfg, p)), base);
}

TEST(HanForward, BatchMatchesSingleBitwise) {
  const HanConfig cfg = small_config();
  auto gen = oracle::make_gen(16);
  const HanParams p = random_han(cfg, gen);
  const Tensor table = oracle::random_const({9, 5}, gen);
  const TokenGrid a = make_grid(4, 5, {{2, 3, 4, 5, 6}, {7}});
  const TokenGrid b = make_grid(4, 5, {});
  const TokenGrid c = make_grid(4, 5, {{}, {8, 8}, {}, {2}});
  const TokenGrid* grids[] = {&a, &b, &c};
  const HanBatchOutput out = han_forward_batch(grids, table, cfg, p);
  EXPECT_EQ(out.has_lyrics, (std::vector<std::uint8_t>{1, 0, 1}));
  const Vec all = v(out.songs);
  const Vec sa = v(han_forward(a, table, cfg, p)), sc = v(han_forward(c, table, cfg, p));
  EXPECT_EQ(Vec(all.begin(), all.begin() + 6), sa);
  EXPECT_EQ(Vec(all.begin() + 6, all.begin() + 12), Vec(6, 0.0));
  EXPECT_EQ(Vec(all.begin() + 12, all.end()), sc);
}

TEST(HanForward, EmptyLyricsRejected) {
  const HanConfig cfg = small_config();
  auto gen = oracle::make_gen(17);
  const HanParams p = random_han(cfg, gen);
  EXPECT_THROW(han_forward(make_grid(3, 3, {}), oracle::random_const({9, 5}, gen), cfg, p), ContractError);
}

TEST(HanForward, GradientCheckTwoSentences) {
  const HanConfig cfg = small_config();
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto gen = oracle::make_gen(500 + seed);
    const HanParams p = random_han(cfg, gen);
    Vec tv = oracle::random_vec(9 * 5, gen);
    std::fill(tv.begin(), tv.begin() + 5, 0.0);
    Tensor table = Tensor::parameter({9, 5}, tv);
    const TokenGrid g = make_grid(3, 4, {{2, 3, 4}, {}, {5, 6}});
    const Tensor c = oracle::random_const({6}, gen);
    auto params = han_named(p);
    params.push_back({"embeddings", table});
    const auto r = grad_check([&] { return sum(mul(han_forward(g, table, cfg, p), c)); }, params);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param << "[" << r.worst_index << "]";
  }
}
