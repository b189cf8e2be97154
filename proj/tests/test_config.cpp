#include <gtest/gtest.h>

#include "vpf/config.hpp"

namespace vpf::config {
namespace {

TEST(Config, ParsesCommentsAndBlocks) {
  const auto kv = parse("# top\nseed = 4  # trailing\n\n d=2\n[desk]\nd = 8\n[other]\nc=16\n");
  EXPECT_EQ(kv.base.at("seed"), "4");
  EXPECT_EQ(kv.base.at("d"), "2");
  EXPECT_EQ(kv.blocks.at("desk").at("d"), "8");
  EXPECT_EQ(kv.blocks.at("other").at("c"), "16");
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(parse("seed 4\n"), ConfigError);
  EXPECT_THROW(parse("seed = 1\nseed = 2\n"), ConfigError);
  EXPECT_THROW(parse("[desk\n"), ConfigError);
  EXPECT_THROW(parse("[a]\n[a]\n"), ConfigError);
  EXPECT_THROW(parse("= 3\n"), ConfigError);
}

TEST(Config, ProfileBlockOverridesBase) {
  const auto kv = parse("profile = desk\nd = 16\nc = 64\n[desk]\nd = 8\n");
  const auto desk = resolve(kv);
  EXPECT_EQ(desk.at("d"), "8");
  EXPECT_EQ(desk.at("c"), "64");
  EXPECT_EQ(resolve(kv, "paper").at("d"), "16");
  EXPECT_THROW(resolve(kv, "missing"), ConfigError);
}

TEST(Config, UnknownKeysAndBadValuesAreErrors) {
  EXPECT_THROW(experiment({{"nonsense", "1"}}), ConfigError);
  EXPECT_THROW(experiment({{"d", "eight"}}), ConfigError);
  EXPECT_THROW(experiment({{"d", "8x"}}), ConfigError);
  EXPECT_THROW(experiment({{"flip", "maybe"}}), ConfigError);
  EXPECT_THROW(experiment({{"arch", "E"}}), ConfigError);
  EXPECT_THROW(experiment({{"precision", "f16"}}), ConfigError);
  EXPECT_THROW(experiment({{"level", "1.5"}}), ConfigError);
  EXPECT_THROW(experiment({{"workers", "-1"}}), ConfigError);
}

TEST(Config, ShippedFileCarriesPaperDefaults) {
  const auto e = experiment(resolve(load(VPF_CONFIG_FILE), "paper"));
  EXPECT_EQ(e.data.objects, 100);
  EXPECT_EQ(e.data.views.image_size, 224);
  EXPECT_EQ(e.model.d, 16);
  EXPECT_EQ(e.model.heads, 8);
  EXPECT_EQ(e.model.ff, 128);
  EXPECT_EQ(e.model.hidden, 128);
  EXPECT_DOUBLE_EQ(e.model.side, 1.1);
  EXPECT_EQ(e.train.k_max, 8);
  EXPECT_EQ(e.train.batch_budget, 16);
  EXPECT_EQ(e.train.points.count, 2048);
  EXPECT_EQ(e.train.points.uniform_parts, 1);
  EXPECT_EQ(e.train.points.surface_parts, 5);
  EXPECT_DOUBLE_EQ(e.train.points.sigma, 0.03);
  EXPECT_DOUBLE_EQ(e.train.points.side, 1.1);
  EXPECT_DOUBLE_EQ(e.train.schedule.lr_min, 1e-4);
  EXPECT_DOUBLE_EQ(e.train.schedule.lr_max, 1e-3);
  EXPECT_EQ(e.train.schedule.warmup, 10000);
  EXPECT_EQ(e.train.schedule.decay_end, 100000);
  EXPECT_DOUBLE_EQ(e.train.adam.weight_decay, 1e-4);
  EXPECT_DOUBLE_EQ(e.train.adam.beta1, 0.9);
  EXPECT_DOUBLE_EQ(e.train.adam.beta2, 0.999);
  EXPECT_DOUBLE_EQ(e.train.adam.eps, 1e-8);
  EXPECT_TRUE(e.train.flip);
  EXPECT_DOUBLE_EQ(e.level, 0.43);
  EXPECT_EQ(e.resolution, 128);
  EXPECT_EQ(e.eval_samples, 100000);
}

TEST(Config, DeskBlock) {
  const auto e = experiment(resolve(load(VPF_CONFIG_FILE), "desk"));
  EXPECT_EQ(e.profile, "desk");
  EXPECT_EQ(e.model.d, 8);
  EXPECT_EQ(e.data.views.image_size, 64);
  EXPECT_EQ(e.train.iterations, 20000);
  EXPECT_EQ(e.train.schedule.warmup, 2000);
  EXPECT_EQ(e.train.schedule.decay_end, 20000);
  EXPECT_DOUBLE_EQ(e.train.stage1_fraction, 0.5);
  EXPECT_EQ(e.model.arch, Arch::D);
  EXPECT_EQ(e.resolution, 64);
}

TEST(Config, SeedDrivesAllStreams) {
  const auto a = experiment({{"seed", "5"}});
  const auto b = experiment({{"seed", "5"}});
  const auto c = experiment({{"seed", "6"}});
  EXPECT_EQ(a.data.seed, 5u);
  EXPECT_EQ(a.model.seed, b.model.seed);
  EXPECT_EQ(a.train.seed, b.train.seed);
  EXPECT_NE(a.model.seed, c.model.seed);
  EXPECT_NE(a.model.seed, a.train.seed);
}

TEST(Config, DescribeRoundTrips) {
  const auto e = experiment(resolve(load(VPF_CONFIG_FILE), "desk"));
  auto kv = parse(describe(e)).base;
  const auto back = experiment(kv);
  EXPECT_EQ(describe(back), describe(e));
}

}  // namespace
}  // namespace vpf::config
