// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "genre/dataset.hpp"
#include "genre/lyrics.hpp"
#include "genre/model.hpp"

namespace genre {

/// Small model for checks and fixtures: an 8 x 60 spectrogram grid, three
/// CNN blocks, 6-dim embeddings and a HAN with 4 hidden units per direction.
/// Same code path as the full-size model.
ModelConfig tiny_model_config(std::vector<std::string> labels);

/// "c<k>w<j>" class words (j < 6) for every class and six shared filler words.
Vocab synthetic_vocab(std::size_t classes);

/// Generated multimodal tracks, `per_class` for each label of `cfg`, ordered
/// class by class. A track of class c carries raised energy in a mel band
/// and periodic impulses whose period depends on c, plus uniform noise; its
/// lyrics are 2-4 lines drawn mostly from the class words. Fully determined
/// by `seed`.
std::vector<Sample> synthetic_samples(const ModelConfig& cfg, const Vocab& vocab, std::size_t per_class,
                                      std::uint64_t seed);

/// Raw lyric text of the kind synthetic_samples encodes.
std::string synthetic_lyrics(std::size_t cls, Rng& rng);
Spectrogram synthetic_spectrogram(std::size_t cls, std::size_t classes, std::size_t mels, std::size_t frames,
                                  Rng& rng);

/// Manifest rows spread over `artists` artists and `classes` genres. Artist a
/// mostly records in genre a mod classes; roughly one artist in eight also
/// has tracks of a second genre. Track counts per artist vary from 1 to 12.
std::vector<TrackRecord> synthetic_manifest(std::size_t classes, std::size_t artists, std::uint64_t seed,
                                            const std::vector<std::string>& labels);

}  // namespace genre
