// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "genre/binary_io.hpp"
#include "genre/dataset.hpp"
#include "genre/error.hpp"
#include "genre/synthetic.hpp"

using namespace genre;
namespace fs = std::filesystem;

namespace {

std::vector<TrackRecord> grid_manifest(std::size_t artists, std::size_t per_artist, const std::string& genre) {
  std::vector<TrackRecord> out;
  for (std::size_t a = 0; a < artists; ++a)
    for (std::size_t t = 0; t < per_artist; ++t)
      out.push_back({"a" + std::to_string(a) + "_" + std::to_string(t), "artist" + std::to_string(a), genre, "",
                     "x.mspc"});
  return out;
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("genre_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Csv, QuotedFields) {
  EXPECT_EQ(split_csv_line("a,\"b,c\",\"d\"\"e\","), (std::vector<std::string>{"a", "b,c", "d\"e", ""}));
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("x,y"), "\"x,y\"");
  EXPECT_EQ(split_csv_line(csv_field("q\"uote, comma")), (std::vector<std::string>{"q\"uote, comma"}));
}

TEST(Manifest, RoundTrip) {
  const std::vector<TrackRecord> tracks{{"t1", "ar1", "Rock", "lyrics/t1.txt", "t1.wav"},
                                        {"t2", "ar2", "Old-Time / Historic", "", "t2.mspc"},
                                        {"t3", "ar, 3", "Jazz", "", "t3.mspc"}};
  const auto parsed = parse_manifest(format_manifest(tracks));
  ASSERT_EQ(parsed.size(), 3u);
  EXPECT_EQ(parsed[1].genre, "Old-Time / Historic");
  EXPECT_EQ(parsed[2].artist_id, "ar, 3");
  EXPECT_EQ(parsed[0].lyrics_path, "lyrics/t1.txt");
}

TEST(Manifest, EmptyBodyIsFine) { EXPECT_TRUE(parse_manifest(std::string(kManifestHeader) + "\n").empty()); }

TEST(Manifest, ErrorsNameTheRow) {
  const std::string head = std::string(kManifestHeader) + "\n";
  auto message = [](const std::string& text) {
    try {
      parse_manifest(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message(head + "t1,a,Rock,,x.mspc\nt2,a,Rock\n").find("row 3"), std::string::npos);
  EXPECT_NE(message(head + "t1,a,Rock,,x.mspc\nt1,b,Rock,,y.mspc\n").find("row 3"), std::string::npos);
  EXPECT_NE(message(head + "t1,,Rock,,x.mspc\n").find("row 2"), std::string::npos);
  EXPECT_FALSE(message("id,artist\n").empty());
}

TEST(Manifest, UnknownGenreNamesRow) {
  const auto tracks = parse_manifest(std::string(kManifestHeader) + "\nt1,a,Rock,,x.mspc\nt2,a,Polka,,y.mspc\n");
  try {
    check_genres(tracks, default_genres());
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 3"), std::string::npos);
    EXPECT_NE(msg.find("Polka"), std::string::npos);
  }
}

TEST(Split, TenArtistsOneClass) {
  const auto tracks = grid_manifest(10, 10, "Rock");
  const auto r = stratified_artist_split(tracks, {"Rock", "Jazz"}, {0.8, 0.1, 0.1}, 3);
  EXPECT_EQ(r.counts[0], (std::array<std::size_t, 3>{80, 10, 10}));
  EXPECT_TRUE(r.flagged_classes.empty());
}

TEST(Split, MixedArtistStaysTogether) {
  auto tracks = grid_manifest(10, 4, "Rock");
  for (std::size_t i = 0; i < 4; i += 2) tracks[i].genre = "Jazz";  // artist0 has both genres
  tracks.push_back({"j1", "artistJ", "Jazz", "", "x.mspc"});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = stratified_artist_split(tracks, {"Rock", "Jazz"}, {0.8, 0.1, 0.1}, seed);
    std::map<std::string, std::set<Split>> per_artist;
    for (const auto& t : tracks) per_artist[t.artist_id].insert(r.assignment.at(t.track_id));
    for (const auto& [artist, splits] : per_artist) EXPECT_EQ(splits.size(), 1u) << artist;
  }
}

TEST(Split, SingleArtistClassIsFlaggedAndTrained) {
  auto tracks = grid_manifest(10, 3, "Rock");
  tracks.push_back({"b1", "solo", "Blues", "", "x.mspc"});
  tracks.push_back({"b2", "solo", "Blues", "", "x.mspc"});
  const auto r = stratified_artist_split(tracks, default_genres(), {0.8, 0.1, 0.1}, 0);
  EXPECT_EQ(r.flagged_classes, (std::vector<std::string>{"Blues"}));
  EXPECT_EQ(r.assignment.at("b1"), Split::train);
}

TEST(Split, SyntheticManifestProperties) {
  const auto labels = default_genres();
  const auto tracks = synthetic_manifest(16, 200, 11, labels);
  const auto r = stratified_artist_split(tracks, labels, {0.8, 0.1, 0.1}, 5);
  EXPECT_EQ(r.assignment.size(), tracks.size());
  std::map<std::string, std::set<Split>> per_artist;
  std::vector<std::array<std::size_t, 3>> counted(16, {0, 0, 0});
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const Split s = r.assignment.at(tracks[i].track_id);
    per_artist[tracks[i].artist_id].insert(s);
    ++counted[static_cast<std::size_t>(std::find(labels.begin(), labels.end(), tracks[i].genre) - labels.begin())]
             [static_cast<std::size_t>(s)];
  }
  for (const auto& [artist, splits] : per_artist) EXPECT_EQ(splits.size(), 1u);
  EXPECT_EQ(counted, r.counts);
  for (std::size_t c = 0; c < 16; ++c) {
    const double total = static_cast<double>(counted[c][0] + counted[c][1] + counted[c][2]);
    EXPECT_NEAR(static_cast<double>(counted[c][0]) / total, 0.8, 0.05) << labels[c];
  }
}

TEST(Split, SeedDeterminesAssignment) {
  const auto labels = default_genres();
  const auto tracks = synthetic_manifest(16, 200, 11, labels);
  EXPECT_EQ(stratified_artist_split(tracks, labels, {0.8, 0.1, 0.1}, 5).assignment,
            stratified_artist_split(tracks, labels, {0.8, 0.1, 0.1}, 5).assignment);
}

TEST(Split, BadFractions) {
  const auto tracks = grid_manifest(2, 2, "Rock");
  EXPECT_THROW(stratified_artist_split(tracks, {"Rock", "Jazz"}, {0.5, 0.1, 0.1}, 0), ConfigError);
}

TEST(Split, FileRoundTripAndSelect) {
  const auto tracks = grid_manifest(10, 2, "Rock");
  const auto r = stratified_artist_split(tracks, {"Rock", "Jazz"}, {0.8, 0.1, 0.1}, 1);
  const auto parsed = parse_split_file(format_split(r.assignment, tracks));
  EXPECT_EQ(parsed, r.assignment);
  std::size_t total = 0;
  for (Split s : {Split::train, Split::val, Split::test}) {
    const auto part = select_split(tracks, parsed, s);
    for (const auto& t : part) EXPECT_EQ(parsed.at(t.track_id), s);
    total += part.size();
  }
  EXPECT_EQ(total, tracks.size());
  EXPECT_EQ(parse_split("val"), Split::val);
  EXPECT_THROW(parse_split("dev"), ConfigError);
}

TEST(Loader, ReadsCacheAndLyrics) {
  const fs::path dir = temp_dir("loader");
  const ModelConfig cfg = tiny_model_config({"a", "b"});
  const Vocab vocab = synthetic_vocab(2);
  Rng rng(1);
  const Spectrogram spec = synthetic_spectrogram(1, 2, 8, 60, rng);
  save_spectrogram(spec, dir / "t1.mspc");
  write_file_text(dir / "t1.txt", "c1w0 c1w1 the\nc1w2 road\n");
  SampleLoader loader{&cfg, &vocab, {}, dir};
  const Sample s = loader.load({"t1", "ar", "b", "t1.txt", "t1.mspc"});
  EXPECT_EQ(s.label, 1);
  EXPECT_EQ(s.spectrogram.values, spec.values);
  EXPECT_EQ(s.lyrics.sentence_count(), 2u);
  EXPECT_EQ(s.lyrics.id(0, 0), vocab.id("c1w0"));

  const Sample bare = loader.load({"t2", "ar", "a", "", "t1.mspc"});
  EXPECT_TRUE(bare.lyrics.empty());
  EXPECT_THROW(loader.load({"t3", "ar", "a", "missing.txt", "t1.mspc"}), IoError);

  ManifestSource source({{"t1", "ar", "b", "t1.txt", "t1.mspc"}}, loader);
  EXPECT_EQ(source.size(), 1u);
  EXPECT_EQ(source.label(0), 1);
  EXPECT_THROW(ManifestSource({{"t9", "ar", "zzz", "", "t1.mspc"}}, loader), ConfigError);
  fs::remove_all(dir);
}
