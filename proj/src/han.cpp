// SPDX-License-Identifier: Apache-2.0
#include "genre/han.hpp"

#include <algorithm>
#include <cmath>

#include "genre/error.hpp"
#include "genre/ops.hpp"

namespace genre {

namespace {

Tensor xavier(Shape shape, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
  std::vector<real> v(numel(shape));
  for (real& x : v) x = rng.uniform(-bound, bound);
  return Tensor::parameter(std::move(shape), std::move(v));
}

Tensor zero_param(std::size_t n) { return Tensor::parameter({n}, std::vector<real>(n, 0.0)); }

void check_gru(const GruParams& p) {
  const std::size_t h = p.u.dim(1);
  if (p.u.rank() != 2 || p.u.dim(0) != 3 * h || p.w.rank() != 2 || p.w.dim(0) != 3 * h ||
      p.b.rank() != 1 || p.b.dim(0) != 3 * h) {
    throw DimensionError("gru: inconsistent parameter shapes W " + shape_str(p.w.shape()) + ", U " +
                         shape_str(p.u.shape()) + ", b " + shape_str(p.b.shape()));
  }
}

std::vector<std::size_t> iota(std::size_t start, std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = start + i;
  return v;
}

// Recurrent part of one step; xw already holds W x + b for every row.
struct GruStep {
  Tensor u_zr;  // [2H x H]
  Tensor u_n;   // [H x H]
  std::size_t hidden;

  explicit GruStep(const GruParams& p) : hidden(p.hidden()) {
    const auto zr = iota(0, 2 * hidden);
    const auto n = iota(2 * hidden, hidden);
    u_zr = gather_rows(p.u, zr);
    u_n = gather_rows(p.u, n);
  }

  Tensor operator()(const Tensor& xw, const Tensor& h) const {
    const Tensor gh = linear(h, u_zr);
    const Tensor z = sigmoid(add(slice_cols(xw, 0, hidden), slice_cols(gh, 0, hidden)));
    const Tensor r = sigmoid(add(slice_cols(xw, hidden, hidden), slice_cols(gh, hidden, hidden)));
    const Tensor n = tanh(add(slice_cols(xw, 2 * hidden, hidden), linear(mul(r, h), u_n)));
    return add(h, mul(z, sub(n, h)));
  }
};

// One direction over [R x L x 3H] precomputed inputs; returns per-step states.
std::vector<Tensor> run_direction(const Tensor& xw, std::span<const std::uint8_t> mask, const GruParams& p,
                                  bool reverse) {
  const std::size_t rows = xw.dim(0), steps = xw.dim(1);
  const GruStep step(p);
  Tensor h = Tensor::zeros({rows, p.hidden()});
  std::vector<Tensor> out(steps);
  Mask column(rows);
  for (std::size_t i = 0; i < steps; ++i) {
    const std::size_t t = reverse ? steps - 1 - i : i;
    std::size_t live = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      column[r] = mask[r * steps + t];
      live += column[r] ? 1 : 0;
    }
    if (live > 0) {
      const Tensor next = step(time_slice(xw, t), h);
      h = live == rows ? next : where_rows(column, next, h);
    }
    out[t] = h;
  }
  return out;
}

}  // namespace

GruParams init_gru(std::size_t input_dim, std::size_t hidden, Rng& rng) {
  if (input_dim == 0 || hidden == 0) throw ConfigError("gru: sizes must be positive");
  GruParams p;
  p.w = xavier({3 * hidden, input_dim}, rng);
  p.u = xavier({3 * hidden, hidden}, rng);
  p.b = zero_param(3 * hidden);
  return p;
}

AttentionParams init_attention(std::size_t input_dim, std::size_t attention_dim, Rng& rng) {
  if (input_dim == 0 || attention_dim == 0) throw ConfigError("attention: sizes must be positive");
  AttentionParams p;
  p.w = xavier({attention_dim, input_dim}, rng);
  p.b = zero_param(attention_dim);
  std::vector<real> c(attention_dim);
  for (real& x : c) x = rng.uniform(-0.1, 0.1);
  p.context = Tensor::parameter({attention_dim}, std::move(c));
  return p;
}

HanParams init_han(const HanConfig& cfg, Rng& rng) {
  HanParams p;
  p.word_fwd = init_gru(cfg.embed_dim, cfg.hidden, rng);
  p.word_bwd = init_gru(cfg.embed_dim, cfg.hidden, rng);
  p.word_att = init_attention(cfg.output_dim(), cfg.attention_dim, rng);
  p.sent_fwd = init_gru(cfg.output_dim(), cfg.hidden, rng);
  p.sent_bwd = init_gru(cfg.output_dim(), cfg.hidden, rng);
  p.sent_att = init_attention(cfg.output_dim(), cfg.attention_dim, rng);
  return p;
}

Tensor gru_cell(const Tensor& x, const Tensor& h, const GruParams& p) {
  check_gru(p);
  if (x.rank() != h.rank() || x.rank() < 1 || x.rank() > 2) {
    throw DimensionError("gru_cell: x " + shape_str(x.shape()) + " and h " + shape_str(h.shape()) +
                         " must both be vectors or both matrices");
  }
  if (x.dim(x.rank() - 1) != p.input_dim() || h.dim(h.rank() - 1) != p.hidden() ||
      (x.rank() == 2 && x.dim(0) != h.dim(0))) {
    throw DimensionError("gru_cell: x " + shape_str(x.shape()) + ", h " + shape_str(h.shape()) +
                         " do not fit W " + shape_str(p.w.shape()));
  }
  if (x.rank() == 1) {
    const Tensor out = gru_cell(reshape(x, {1, x.dim(0)}), reshape(h, {1, h.dim(0)}), p);
    return reshape(out, {p.hidden()});
  }
  return GruStep(p)(linear(x, p.w, p.b), h);
}

Tensor bigru(const Tensor& seq, std::span<const std::uint8_t> mask, const GruParams& fwd, const GruParams& bwd) {
  check_gru(fwd);
  check_gru(bwd);
  if (seq.rank() == 2) {
    const Tensor out = bigru(reshape(seq, {1, seq.dim(0), seq.dim(1)}), mask, fwd, bwd);
    return reshape(out, {seq.dim(0), out.dim(2)});
  }
  if (seq.rank() != 3) throw DimensionError("bigru: expected [R x L x D], got " + shape_str(seq.shape()));
  const std::size_t rows = seq.dim(0), steps = seq.dim(1), dim = seq.dim(2);
  if (steps == 0) throw ContractError("bigru: empty sequence");
  if (dim != fwd.input_dim() || dim != bwd.input_dim() || fwd.hidden() != bwd.hidden()) {
    throw DimensionError("bigru: input dim " + std::to_string(dim) + " does not match the GRU parameters");
  }
  if (mask.size() != rows * steps) {
    throw DimensionError("bigru: mask of " + std::to_string(mask.size()) + " entries for " +
                         std::to_string(rows) + "x" + std::to_string(steps) + " steps");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    if (std::none_of(mask.begin() + r * steps, mask.begin() + (r + 1) * steps, [](auto m) { return m != 0; })) {
      throw ContractError("bigru: row " + std::to_string(r) + " has no unmasked step");
    }
  }
  const Tensor flat = reshape(seq, {rows * steps, dim});
  const std::size_t g = 3 * fwd.hidden();
  const Tensor xf = reshape(linear(flat, fwd.w, fwd.b), {rows, steps, g});
  const Tensor xb = reshape(linear(flat, bwd.w, bwd.b), {rows, steps, g});
  const auto hf = run_direction(xf, mask, fwd, false);
  const auto hb = run_direction(xb, mask, bwd, true);
  std::vector<Tensor> joined(steps);
  for (std::size_t t = 0; t < steps; ++t) joined[t] = concat(hf[t], hb[t]);
  return stack_time(joined);
}

AttentionOutput attention(const Tensor& h, const AttentionParams& p, std::span<const std::uint8_t> mask) {
  if (h.rank() == 2) {
    AttentionOutput out = attention(reshape(h, {1, h.dim(0), h.dim(1)}), p, mask);
    return {reshape(out.summary, {h.dim(1)}), reshape(out.alpha, {h.dim(0)})};
  }
  if (h.rank() != 3) throw DimensionError("attention: expected [R x L x E], got " + shape_str(h.shape()));
  const std::size_t rows = h.dim(0), steps = h.dim(1), dim = h.dim(2);
  if (p.w.rank() != 2 || p.w.dim(1) != dim || p.b.numel() != p.w.dim(0) || p.context.numel() != p.w.dim(0)) {
    throw DimensionError("attention: parameters W " + shape_str(p.w.shape()) + " do not fit input width " +
                         std::to_string(dim));
  }
  if (mask.size() != rows * steps) throw DimensionError("attention: mask size does not match the input");
  const Tensor u = tanh(linear(reshape(h, {rows * steps, dim}), p.w, p.b));
  const Tensor scores = matmul(u, reshape(p.context, {p.context.numel(), 1}));
  const Tensor alpha = softmax(reshape(scores, {rows, steps}), mask);
  return {weighted_sum_time(alpha, h), alpha};
}

HanBatchOutput han_forward_batch(std::span<const TokenGrid* const> grids, const Tensor& embeddings,
                                 const HanConfig& cfg, const HanParams& p) {
  if (embeddings.rank() != 2 || embeddings.dim(1) != cfg.embed_dim) {
    throw DimensionError("han: embedding table " + shape_str(embeddings.shape()) + " does not have width " +
                         std::to_string(cfg.embed_dim));
  }
  const std::size_t batch = grids.size();
  const std::size_t width = cfg.output_dim();
  HanBatchOutput out;
  out.has_lyrics.assign(batch, 0);
  out.attention.resize(batch);

  // Word level over every real sentence of the batch.
  struct SentRef {
    std::size_t song, row;
  };
  std::vector<SentRef> refs;
  std::size_t words = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    const TokenGrid& g = *grids[b];
    g.validate();
    for (std::size_t s = 0; s < g.max_sentences; ++s) {
      if (!g.has_sentence(s)) continue;
      refs.push_back({b, s});
      out.has_lyrics[b] = 1;
      for (std::size_t w = 0; w < g.max_words; ++w) {
        if (g.has_word(s, w)) words = std::max(words, w + 1);
      }
    }
  }
  if (refs.empty()) {
    out.songs = Tensor::zeros({batch, width});
    return out;
  }
  std::vector<int> ids(refs.size() * words, Vocab::kPad);
  Mask word_mask(refs.size() * words, 0);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const TokenGrid& g = *grids[refs[i].song];
    for (std::size_t w = 0; w < std::min(words, g.max_words); ++w) {
      ids[i * words + w] = g.id(refs[i].row, w);
      word_mask[i * words + w] = g.has_word(refs[i].row, w) ? 1 : 0;
    }
  }
  const Tensor embedded = reshape(embedding(embeddings, ids, Vocab::kPad), {refs.size(), words, cfg.embed_dim});
  const Tensor word_states = bigru(embedded, word_mask, p.word_fwd, p.word_bwd);
  const AttentionOutput word_att = attention(word_states, p.word_att, word_mask);

  // Sentence level over every song that has lyrics.
  std::vector<std::size_t> song_slot(batch, 0), songs_with_lyrics;
  std::size_t sentences = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (!out.has_lyrics[b]) continue;
    song_slot[b] = songs_with_lyrics.size();
    songs_with_lyrics.push_back(b);
  }
  for (const auto& r : refs) sentences = std::max(sentences, r.row + 1);
  const std::size_t n_songs = songs_with_lyrics.size();
  std::vector<std::size_t> targets(refs.size());
  Mask sent_mask(n_songs * sentences, 0);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    targets[i] = song_slot[refs[i].song] * sentences + refs[i].row;
    sent_mask[targets[i]] = 1;
  }
  const Tensor placed =
      reshape(scatter_rows(word_att.summary, targets, n_songs * sentences), {n_songs, sentences, width});
  const Tensor sent_states = bigru(placed, sent_mask, p.sent_fwd, p.sent_bwd);
  const AttentionOutput sent_att = attention(sent_states, p.sent_att, sent_mask);
  out.songs = n_songs == batch ? sent_att.summary : scatter_rows(sent_att.summary, songs_with_lyrics, batch);

  const auto wa = word_att.alpha.data();
  const auto sa = sent_att.alpha.data();
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const TokenGrid& g = *grids[refs[i].song];
    SongAttention& att = out.attention[refs[i].song];
    att.sentences.push_back(refs[i].row);
    std::vector<real> row(g.max_words, 0.0);
    for (std::size_t w = 0; w < std::min(words, g.max_words); ++w) row[w] = wa[i * words + w];
    att.word_alpha.push_back(std::move(row));
  }
  for (std::size_t b : songs_with_lyrics) {
    SongAttention& att = out.attention[b];
    att.sentence_alpha.assign(grids[b]->max_sentences, 0.0);
    for (std::size_t s = 0; s < std::min(sentences, grids[b]->max_sentences); ++s) {
      att.sentence_alpha[s] = sa[song_slot[b] * sentences + s];
    }
  }
  return out;
}

Tensor han_forward(const TokenGrid& grid, const Tensor& embeddings, const HanConfig& cfg, const HanParams& p,
                   SongAttention* attention_out) {
  grid.validate();
  if (grid.empty()) throw ContractError("han: the lyrics grid holds no sentence");
  const TokenGrid* one[] = {&grid};
  HanBatchOutput out = han_forward_batch(one, embeddings, cfg, p);
  if (attention_out) *attention_out = std::move(out.attention[0]);
  return reshape(out.songs, {cfg.output_dim()});
}

}  // namespace genre
