// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "genre/lyrics.hpp"
#include "genre/model.hpp"
#include "genre/spectrogram.hpp"

namespace genre {

/// One manifest row. Paths are kept as written; relative paths resolve
/// against the manifest's directory.
struct TrackRecord {
  std::string track_id;
  std::string artist_id;
  std::string genre;
  std::string lyrics_path;       // may be empty: track without lyrics
  std::string spectrogram_path;  // .mspc cache or .wav audio
};

inline constexpr std::string_view kManifestHeader = "track_id,artist_id,genre,lyrics_path,spectrogram_path";

/// Splits one CSV line; double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_field(std::string_view value);

/// ConfigError naming the row (1-based line number) on a bad header, wrong
/// field count, empty id/artist/genre/spectrogram path, or duplicate track.
std::vector<TrackRecord> parse_manifest(std::string_view text);
std::vector<TrackRecord> read_manifest(const std::filesystem::path& path);
std::string format_manifest(const std::vector<TrackRecord>& tracks);

/// ConfigError naming the row when a genre is not in `labels`.
void check_genres(const std::vector<TrackRecord>& tracks, const std::vector<std::string>& labels);

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };
std::string_view split_name(Split s);
Split parse_split(std::string_view name);

struct SplitResult {
  std::map<std::string, Split> assignment;  // track_id -> split
  /// counts[c][s]: tracks of class c placed in split s.
  std::vector<std::array<std::size_t, 3>> counts;
  /// Classes whose tracks all belong to one artist; that artist went to train.
  std::vector<std::string> flagged_classes;
};

/// Artist-atomic stratified split. Artists are shuffled with `seed`, stably
/// sorted by track count (largest first) and each is placed in the split s
/// maximizing sum_c a_c (f_s N_c - placed_{s,c}) / N_c, where a_c counts the
/// artist's class-c tracks and N_c the class total; ties go train, val, test.
SplitResult stratified_artist_split(const std::vector<TrackRecord>& tracks, const std::vector<std::string>& labels,
                                    std::array<double, 3> fractions = {0.8, 0.1, 0.1}, std::uint64_t seed = 0);

/// "track_id,split" CSV with a header line.
std::string format_split(const std::map<std::string, Split>& assignment, const std::vector<TrackRecord>& order);
std::map<std::string, Split> parse_split_file(std::string_view text);

std::vector<TrackRecord> select_split(const std::vector<TrackRecord>& tracks, const std::map<std::string, Split>& assignment,
                                      Split which);

/// Random access to training examples.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual int label(std::size_t i) const = 0;
  virtual Sample load(std::size_t i) const = 0;
};

class MemorySource : public SampleSource {
 public:
  explicit MemorySource(std::vector<Sample> samples) : samples_(std::move(samples)) {}
  std::size_t size() const override { return samples_.size(); }
  int label(std::size_t i) const override { return samples_.at(i).label; }
  Sample load(std::size_t i) const override { return samples_.at(i); }
  const std::vector<Sample>& samples() const { return samples_; }

 private:
  std::vector<Sample> samples_;
};

struct SampleLoader {
  const ModelConfig* model = nullptr;
  const Vocab* vocab = nullptr;
  SpectrogramConfig audio;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& path) const;
  /// Reads the spectrogram (cache or WAV) and encodes the lyrics file.
  Sample load(const TrackRecord& track) const;
};

/// Loads tracks lazily from disk on each access.
class ManifestSource : public SampleSource {
 public:
  ManifestSource(std::vector<TrackRecord> tracks, SampleLoader loader);
  std::size_t size() const override { return tracks_.size(); }
  int label(std::size_t i) const override { return labels_.at(i); }
  Sample load(std::size_t i) const override { return loader_.load(tracks_.at(i)); }

 private:
  std::vector<TrackRecord> tracks_;
  std::vector<int> labels_;
  SampleLoader loader_;
};

/// Lyric lines of every track (files that do not exist are an IoError).
std::vector<Sentence> collect_sentences(const std::vector<TrackRecord>& tracks, const std::filesystem::path& base_dir);

}  // namespace genre
