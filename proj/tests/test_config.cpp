#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "proxyevent/config.hpp"

using namespace proxyevent;

TEST(Config, ParsesIniSections) {
  const auto c = Config::parse("[model]\nd_h = 8\nheads = 2\n[train]\nlr_rest = 0.01\n");
  const auto t = train_config_from(c);
  EXPECT_EQ(t.d_h, 8u);
  EXPECT_EQ(t.heads, 2u);
  EXPECT_DOUBLE_EQ(t.lr_rest, 0.01);
  EXPECT_EQ(t.num_proxies, TrainConfig{}.num_proxies);
}

TEST(Config, LoadsFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "proxyevent_config_test.ini";
  std::ofstream(path) << "[gen]\ndocs = 12\nseed = 3\n";
  const auto g = gen_config_from(Config::load(path));
  EXPECT_EQ(g.num_docs, 12u);
  EXPECT_EQ(g.seed, 3u);
  std::filesystem::remove(path);
  EXPECT_THROW(Config::load("/nonexistent/x.ini"), IoError);
}

TEST(Config, OverridesReplaceValues) {
  auto c = Config::parse("[train]\nbatch_size = 4\n");
  c.set("train.batch_size=9");
  c.set("model.ablation=no_hdm");
  const auto t = train_config_from(c);
  EXPECT_EQ(t.batch_size, 9u);
  EXPECT_EQ(t.ablation, Ablation::NoHdm);
}

TEST(Config, MalformedOverridesRejected) {
  Config c;
  EXPECT_THROW(c.set("batch_size=3"), ConfigError);
  EXPECT_THROW(c.set("train.batch_size"), ConfigError);
  EXPECT_THROW(c.set("=3"), ConfigError);
}

TEST(Config, WrongTypeIsConfigError) {
  auto c = Config::parse("[train]\nbatch_size = many\n");
  EXPECT_THROW(train_config_from(c), ConfigError);
}

TEST(Config, ParseErrorIsConfigError) { EXPECT_THROW(Config::parse("[model\nd_h=3\n"), ConfigError); }

TEST(Config, InvalidTrainValuesRejected) {
  EXPECT_THROW(train_config_from(Config::parse("[model]\nd_h = 10\nheads = 4\n")), ConfigError);
  EXPECT_THROW(train_config_from(Config::parse("[model]\nnum_proxies = 0\n")), ConfigError);
  EXPECT_THROW(train_config_from(Config::parse("[train]\nlr_rest = 0\n")), ConfigError);
}

TEST(Ablation, ParseAndPrint) {
  for (auto a : {Ablation::Full, Ablation::NoHypernetwork, Ablation::NoProxy, Ablation::NoHdm})
    EXPECT_EQ(parse_ablation(to_string(a)), a);
  EXPECT_THROW(parse_ablation("no_everything"), ConfigError);
}

TEST(Config, TrainConfigRoundTrip) {
  TrainConfig t;
  t.d_h = 12;
  t.heads = 3;
  t.lr_encoder = 3.3e-4;
  t.proxy_init_std = 0.123456789;
  t.seed = 99;
  t.ablation = Ablation::NoProxy;
  Config c;
  store(c, t);
  const auto back = train_config_from(Config::parse(c.str()));
  EXPECT_EQ(back.d_h, 12u);
  EXPECT_EQ(back.heads, 3u);
  EXPECT_EQ(back.lr_encoder, 3.3e-4);
  EXPECT_EQ(back.proxy_init_std, 0.123456789);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.ablation, Ablation::NoProxy);
}

TEST(Config, GenConfigRoundTrip) {
  datakit::GenConfig g;
  g.seed = 42;
  g.num_docs = 17;
  g.share_prob = 0.35;
  g.events_max = 4;
  Config c;
  store(c, g);
  const auto back = gen_config_from(Config::parse(c.str()));
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.num_docs, 17u);
  EXPECT_EQ(back.share_prob, 0.35);
  EXPECT_EQ(back.events_max, 4u);
}

TEST(Config, InvalidGenValuesRejected) {
  EXPECT_THROW(gen_config_from(Config::parse("[gen]\nshare_prob = 2\n")), ConfigError);
  EXPECT_THROW(gen_config_from(Config::parse("[gen]\nevents_min = 3\nevents_max = 2\n")), ConfigError);
}
