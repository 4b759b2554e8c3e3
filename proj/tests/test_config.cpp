// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>

#include "genre/config.hpp"
#include "genre/error.hpp"

namespace {

using namespace genre;

TEST(Config, DefaultsValidateAndMatchModelDefaults) {
  const RunConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  const ModelConfig m = cfg.model_config();
  EXPECT_EQ(m.cnn.input_mels, 500u);
  EXPECT_EQ(m.cnn.input_frames, 1500u);
  EXPECT_EQ(m.fused_dim(), 600u);
  EXPECT_EQ(m.classes(), 16u);
  EXPECT_EQ(m, ModelConfig{});
}

TEST(Config, ParsesKeysCommentsAndWhitespace) {
  RunConfig cfg;
  apply_config_text(cfg,
                    "# training\n"
                    "lr = 0.25   # trailing comment\n"
                    "\n"
                    "  batch_size=7\n"
                    "labels = a, b ,c\n"
                    "window = rectangular\n"
                    "embeddings_trainable = false\n"
                    "split_seed = 12\n"
                    "split_fractions = 0.7,0.2,0.1\n");
  EXPECT_EQ(cfg.train.lr, 0.25);
  EXPECT_EQ(cfg.train.batch_size, 7u);
  EXPECT_EQ(cfg.labels, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(cfg.audio.window, WindowKind::rectangular);
  EXPECT_FALSE(cfg.embeddings_trainable);
  EXPECT_EQ(cfg.split_seed, 12u);
  EXPECT_EQ(cfg.split_fractions[1], 0.2);
}

TEST(Config, UnknownKeyNamesLine) {
  RunConfig cfg;
  try {
    apply_config_text(cfg, "lr = 0.1\nlearning_rate = 0.1\n");
    FAIL() << "accepted an unknown key";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("learning_rate"), std::string::npos) << msg;
  }
  EXPECT_THROW(apply_setting(cfg, "nope", "1"), ConfigError);
}

TEST(Config, RepeatedKeyAndMalformedLinesRejected) {
  RunConfig cfg;
  EXPECT_THROW(apply_config_text(cfg, "lr = 0.1\nlr = 0.2\n"), ConfigError);
  EXPECT_THROW(apply_config_text(cfg, "just words\n"), ConfigError);
}

TEST(Config, ValuesMustParseCompletely) {
  RunConfig cfg;
  EXPECT_THROW(apply_setting(cfg, "lr", "0.1x"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "batch_size", "-3"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "batch_size", "2.5"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "window", "hamming"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "embeddings_trainable", "maybe"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "split_fractions", "0.5,0.5"), ConfigError);
}

TEST(Config, ValidationCatchesInconsistentSettings) {
  auto invalid = [](const std::string& key, const std::string& value) {
    RunConfig cfg;
    apply_setting(cfg, key, value);
    EXPECT_THROW(cfg.validate(), ConfigError) << key << "=" << value;
  };
  invalid("lr", "-0.1");
  invalid("batch_size", "0");
  invalid("split_fractions", "0.5,0.2,0.2");
  invalid("cnn_dropout", "1");
  invalid("labels", "a,a");
  invalid("cnn_blocks", "256:9000:1:0");
  invalid("frames", "0");
}

TEST(Config, FormatRoundTrips) {
  RunConfig cfg;
  apply_config_text(cfg, "lr = 0.1\nlabels = x,y\nn_mels = 64\nframes = 200\ncnn_blocks = 8:4:1:2,8:3:1:0\n"
                         "split_seed = 5\nmanifest = /data/m.csv\nfmin = 30.5\n");
  const std::string text = format_config(cfg);
  RunConfig back;
  apply_config_text(back, text);
  EXPECT_EQ(format_config(back), text);
  EXPECT_EQ(back.train, cfg.train);
  EXPECT_EQ(back.audio, cfg.audio);
  EXPECT_EQ(back.model_config(), cfg.model_config());
  EXPECT_EQ(back.split_seed, cfg.split_seed);
  EXPECT_EQ(back.manifest, "/data/m.csv");

  // Every key appears once in the rendering.
  for (const auto& key : config_keys()) EXPECT_NE(text.find(key + " = "), std::string::npos) << key;
  RunConfig defaults;
  RunConfig again;
  apply_config_text(again, format_config(defaults));
  EXPECT_EQ(format_config(again), format_config(defaults));
  EXPECT_FALSE(again.split_seed.has_value());
}

TEST(Config, KeysSorted) {
  const auto keys = config_keys();
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
  EXPECT_NE(std::find(keys.begin(), keys.end(), "momentum"), keys.end());
}

}  // namespace
