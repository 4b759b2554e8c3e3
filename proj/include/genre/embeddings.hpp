// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <string_view>

#include "genre/lyrics.hpp"
#include "genre/rng.hpp"
#include "genre/tensor.hpp"

namespace genre {

inline constexpr std::size_t kDefaultEmbeddingDim = 300;
inline constexpr double kUnknownInitRange = 0.25;

/// Word embedding table W_e, |V| x dim. Row 0 (PAD) is zero and never trained.
struct EmbeddingMatrix {
  Tensor table;
  bool trainable = true;
  std::size_t found = 0;    // vocabulary tokens taken from the file
  std::size_t missing = 0;  // rows drawn at random (UNK included)

  std::size_t dim() const { return table.dim(1); }
  std::size_t rows() const { return table.dim(0); }
};

/// Reads the text format "<count> <dim>" then "token v1 ... v_dim" per line.
/// Vocabulary tokens present in the file copy its vector exactly; every other
/// non-PAD row, UNK included, is drawn i.i.d. from uniform(-0.25, 0.25) in id
/// order. Only rows of the vocabulary are kept in memory.
///
/// FormatError (with line number) on a declared dim other than expected_dim,
/// a malformed line, or fewer vectors than declared.
EmbeddingMatrix parse_embeddings(std::string_view text, const Vocab& vocab, Rng& rng,
                                 std::size_t expected_dim = kDefaultEmbeddingDim,
                                 bool trainable = true);
EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const Vocab& vocab, Rng& rng,
                                std::size_t expected_dim = kDefaultEmbeddingDim,
                                bool trainable = true);

/// All non-PAD rows random, as when no pretrained file is available.
EmbeddingMatrix random_embeddings(const Vocab& vocab, std::size_t dim, Rng& rng, bool trainable = true);

}  // namespace genre
