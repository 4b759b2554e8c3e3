// SPDX-License-Identifier: Apache-2.0
#include "genre/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "genre/binary_io.hpp"
#include "genre/error.hpp"
#include "genre/rng.hpp"

namespace genre {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) throw FormatError("unterminated quote in CSV line");
  return fields;
}

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

namespace {

std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> lines;
  std::string cur;
  std::istringstream in{std::string(text)};
  while (std::getline(in, cur)) {
    if (!cur.empty() && cur.back() == '\r') cur.pop_back();
    lines.push_back(cur);
  }
  return lines;
}

}  // namespace

std::vector<TrackRecord> parse_manifest(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != kManifestHeader) {
    throw ConfigError("manifest row 1: header must be '" + std::string(kManifestHeader) + "'");
  }
  std::vector<TrackRecord> out;
  std::set<std::string> ids;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string row = "manifest row " + std::to_string(i + 1);
    std::vector<std::string> f;
    try {
      f = split_csv_line(lines[i]);
    } catch (const FormatError& e) {
      throw ConfigError(row + ": " + e.what());
    }
    if (f.size() != 5) throw ConfigError(row + ": expected 5 fields, found " + std::to_string(f.size()));
    TrackRecord t{f[0], f[1], f[2], f[3], f[4]};
    if (t.track_id.empty()) throw ConfigError(row + ": empty track_id");
    if (t.artist_id.empty()) throw ConfigError(row + ": empty artist_id");
    if (t.genre.empty()) throw ConfigError(row + ": empty genre");
    if (t.spectrogram_path.empty()) throw ConfigError(row + ": empty spectrogram_path");
    if (!ids.insert(t.track_id).second) throw ConfigError(row + ": duplicate track_id '" + t.track_id + "'");
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<TrackRecord> read_manifest(const std::filesystem::path& path) {
  try {
    return parse_manifest(read_file_text(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string format_manifest(const std::vector<TrackRecord>& tracks) {
  std::string out(kManifestHeader);
  out += '\n';
  for (const auto& t : tracks) {
    out += csv_field(t.track_id) + ',' + csv_field(t.artist_id) + ',' + csv_field(t.genre) + ',' +
           csv_field(t.lyrics_path) + ',' + csv_field(t.spectrogram_path) + '\n';
  }
  return out;
}

void check_genres(const std::vector<TrackRecord>& tracks, const std::vector<std::string>& labels) {
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (std::find(labels.begin(), labels.end(), tracks[i].genre) == labels.end()) {
      throw ConfigError("manifest row " + std::to_string(i + 2) + " (track '" + tracks[i].track_id +
                        "'): unknown genre '" + tracks[i].genre + "'");
    }
  }
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(name) + "' (expected train, val or test)");
}

SplitResult stratified_artist_split(const std::vector<TrackRecord>& tracks, const std::vector<std::string>& labels,
                                    std::array<double, 3> fractions, std::uint64_t seed) {
  check_genres(tracks, labels);
  const double fsum = fractions[0] + fractions[1] + fractions[2];
  if (std::any_of(fractions.begin(), fractions.end(), [](double f) { return f < 0.0; }) || std::abs(fsum - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be nonnegative and sum to 1");
  }
  const std::size_t g = labels.size();
  auto class_of = [&](const TrackRecord& t) {
    return static_cast<std::size_t>(std::find(labels.begin(), labels.end(), t.genre) - labels.begin());
  };

  struct Artist {
    std::string id;
    std::vector<std::size_t> tracks;
    std::vector<std::size_t> per_class;
  };
  std::vector<Artist> artists;
  std::map<std::string, std::size_t> index;
  std::vector<std::size_t> class_total(g, 0);
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    auto [it, fresh] = index.emplace(tracks[i].artist_id, artists.size());
    if (fresh) artists.push_back({tracks[i].artist_id, {}, std::vector<std::size_t>(g, 0)});
    Artist& a = artists[it->second];
    a.tracks.push_back(i);
    ++a.per_class[class_of(tracks[i])];
    ++class_total[class_of(tracks[i])];
  }

  SplitResult result;
  result.counts.assign(g, {0, 0, 0});
  std::vector<std::uint8_t> forced(artists.size(), 0);
  for (std::size_t c = 0; c < g; ++c) {
    if (class_total[c] == 0) continue;
    for (std::size_t a = 0; a < artists.size(); ++a) {
      if (artists[a].per_class[c] == class_total[c]) {
        forced[a] = 1;
        result.flagged_classes.push_back(labels[c]);
      }
    }
  }

  std::vector<std::size_t> order(artists.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return artists[x].tracks.size() > artists[y].tracks.size(); });

  auto place = [&](std::size_t a, Split s) {
    for (std::size_t c = 0; c < g; ++c) result.counts[c][static_cast<std::size_t>(s)] += artists[a].per_class[c];
    for (std::size_t t : artists[a].tracks) result.assignment[tracks[t].track_id] = s;
  };
  for (std::size_t a = 0; a < artists.size(); ++a) {
    if (forced[a]) place(a, Split::train);
  }
  for (std::size_t a : order) {
    if (forced[a]) continue;
    std::size_t best = 0;
    double best_score = 0.0;
    for (std::size_t s = 0; s < 3; ++s) {
      double score = 0.0;
      for (std::size_t c = 0; c < g; ++c) {
        if (artists[a].per_class[c] == 0) continue;
        const double n = static_cast<double>(class_total[c]);
        score += static_cast<double>(artists[a].per_class[c]) *
                 (fractions[s] * n - static_cast<double>(result.counts[c][s])) / n;
      }
      if (s == 0 || score > best_score) {
        best = s;
        best_score = score;
      }
    }
    place(a, static_cast<Split>(best));
  }
  return result;
}

std::string format_split(const std::map<std::string, Split>& assignment, const std::vector<TrackRecord>& order) {
  std::string out = "track_id,split\n";
  for (const auto& t : order) {
    const auto it = assignment.find(t.track_id);
    if (it == assignment.end()) throw ContractError("track '" + t.track_id + "' has no split");
    out += csv_field(t.track_id) + ',' + std::string(split_name(it->second)) + '\n';
  }
  return out;
}

std::map<std::string, Split> parse_split_file(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != "track_id,split") throw ConfigError("split file row 1: header must be 'track_id,split'");
  std::map<std::string, Split> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split_csv_line(lines[i]);
    const std::string row = "split file row " + std::to_string(i + 1);
    if (f.size() != 2) throw ConfigError(row + ": expected 2 fields");
    try {
      if (!out.emplace(f[0], parse_split(f[1])).second) throw ConfigError("duplicate track '" + f[0] + "'");
    } catch (const ConfigError& e) {
      throw ConfigError(row + ": " + e.what());
    }
  }
  return out;
}

std::vector<TrackRecord> select_split(const std::vector<TrackRecord>& tracks, const std::map<std::string, Split>& assignment,
                                      Split which) {
  std::vector<TrackRecord> out;
  for (const auto& t : tracks) {
    const auto it = assignment.find(t.track_id);
    if (it == assignment.end()) throw ConfigError("track '" + t.track_id + "' is missing from the split file");
    if (it->second == which) out.push_back(t);
  }
  return out;
}

std::filesystem::path SampleLoader::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

Sample SampleLoader::load(const TrackRecord& track) const {
  Sample s;
  s.track_id = track.track_id;
  s.label = model->label_id(track.genre);
  if (s.label < 0) throw ConfigError("track '" + track.track_id + "': unknown genre '" + track.genre + "'");
  const auto spec_path = resolve(track.spectrogram_path);
  s.spectrogram = spec_path.extension() == ".wav" ? spectrogram_from_wav(spec_path, audio) : load_spectrogram(spec_path);
  if (track.lyrics_path.empty()) {
    s.lyrics = encode_and_pad({}, *vocab, model->max_sentences, model->max_words);
  } else {
    s.lyrics = encode_lyrics(read_file_text(resolve(track.lyrics_path)), *vocab, model->max_sentences, model->max_words);
  }
  return s;
}

ManifestSource::ManifestSource(std::vector<TrackRecord> tracks, SampleLoader loader)
    : tracks_(std::move(tracks)), loader_(std::move(loader)) {
  for (const auto& t : tracks_) {
    const int id = loader_.model->label_id(t.genre);
    if (id < 0) throw ConfigError("track '" + t.track_id + "': unknown genre '" + t.genre + "'");
    labels_.push_back(id);
  }
}

std::vector<Sentence> collect_sentences(const std::vector<TrackRecord>& tracks, const std::filesystem::path& base_dir) {
  std::vector<Sentence> out;
  for (const auto& t : tracks) {
    if (t.lyrics_path.empty()) continue;
    const std::filesystem::path p(t.lyrics_path);
    auto s = segment_sentences(read_file_text(p.is_absolute() ? p : base_dir / p));
    out.insert(out.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  return out;
}

}  // namespace genre
