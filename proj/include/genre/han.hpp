// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "genre/embeddings.hpp"
#include "genre/lyrics.hpp"
#include "genre/rng.hpp"
#include "genre/tensor.hpp"

namespace genre {

/// Gate rows are stacked in the order update (z), reset (r), candidate (n).
struct GruParams {
  Tensor w;  // [3H x D]
  Tensor u;  // [3H x H]
  Tensor b;  // [3H]

  std::size_t hidden() const { return u.dim(1); }
  std::size_t input_dim() const { return w.dim(1); }
};

struct AttentionParams {
  Tensor w;        // [A x 2H]
  Tensor b;        // [A]
  Tensor context;  // [A]
};

struct HanConfig {
  std::size_t embed_dim = kDefaultEmbeddingDim;
  std::size_t hidden = 50;
  std::size_t attention_dim = 100;

  std::size_t output_dim() const { return 2 * hidden; }
  bool operator==(const HanConfig&) const = default;
};

struct HanParams {
  GruParams word_fwd, word_bwd;
  AttentionParams word_att;
  GruParams sent_fwd, sent_bwd;
  AttentionParams sent_att;
};

GruParams init_gru(std::size_t input_dim, std::size_t hidden, Rng& rng);
AttentionParams init_attention(std::size_t input_dim, std::size_t attention_dim, Rng& rng);
/// Matrices uniform in +-sqrt(6 / (fan_in + fan_out)), biases 0, context
/// vectors uniform in +-0.1.
HanParams init_han(const HanConfig& cfg, Rng& rng);

/// One step for a batch of rows: x [R x D], h [R x H] -> [R x H].
///   z = sigmoid(W_z x + U_z h + b_z)
///   r = sigmoid(W_r x + U_r h + b_r)
///   n = tanh(W_n x + U_n (r * h) + b_n)
///   h' = (1 - z) * h + z * n
Tensor gru_cell(const Tensor& x, const Tensor& h, const GruParams& p);

/// Bidirectional GRU over [R x L x D] (or a single [L x D] sequence) with a
/// row-major R x L mask. Masked steps carry the hidden state through
/// unchanged and emit it as their output. Output [R x L x 2H] ([L x 2H]),
/// forward half first. ContractError when a row has no unmasked step.
Tensor bigru(const Tensor& seq, std::span<const std::uint8_t> mask, const GruParams& fwd,
             const GruParams& bwd);

struct AttentionOutput {
  Tensor summary;  // [R x 2H] ([2H] for a single sequence)
  Tensor alpha;    // [R x L] ([L])
};

/// u_i = tanh(W_a h_i + b_a), alpha = masked softmax of u_i . u_a,
/// s = sum_i alpha_i h_i. h is [R x L x 2H] or [L x 2H].
AttentionOutput attention(const Tensor& h, const AttentionParams& p, std::span<const std::uint8_t> mask);

/// Attention weights of one song, for inspection.
struct SongAttention {
  std::vector<std::size_t> sentences;               // grid rows that hold a sentence
  std::vector<std::vector<real>> word_alpha;        // per listed sentence, length max_words
  std::vector<real> sentence_alpha;                 // length max_sentences
};

struct HanBatchOutput {
  Tensor songs;                        // [B x 2H]; zero rows for songs without lyrics
  std::vector<std::uint8_t> has_lyrics;  // per song
  std::vector<SongAttention> attention;  // per song (empty for songs without lyrics)
};

/// Encodes a batch of songs. The word level runs once over every real
/// sentence of the batch, the sentence level once over every song with lyrics.
HanBatchOutput han_forward_batch(std::span<const TokenGrid* const> grids, const Tensor& embeddings,
                                 const HanConfig& cfg, const HanParams& p);

/// Single song -> [2H]. ContractError for a grid without sentences.
Tensor han_forward(const TokenGrid& grid, const Tensor& embeddings, const HanConfig& cfg,
                   const HanParams& p, SongAttention* attention_out = nullptr);

}  // namespace genre
