// SPDX-FileCopyrightText: (c) 2026 The cpl-lab Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "cpl/config.hpp"
#include "cpl/error.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>

namespace cpl {
namespace {

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

TEST(Schema, SortedAndDocumented) {
  const auto& schema = config_schema();
  ASSERT_FALSE(schema.empty());
  EXPECT_TRUE(std::is_sorted(schema.begin(), schema.end(),
                             [](const auto& a, const auto& b) { return a.key < b.key; }));
  for (const auto& f : schema) {
    EXPECT_FALSE(f.help.empty()) << f.key;
    if (f.type == FieldType::choice) {
      EXPECT_NE(std::find(f.choices.begin(), f.choices.end(), f.default_value), f.choices.end())
          << f.key;
    }
  }
  ASSERT_NE(find_field("run.seed"), nullptr);
  EXPECT_TRUE(find_field("run.seed")->required);
  EXPECT_EQ(find_field("nope"), nullptr);
}

TEST(ConfigMap, ParseCommentsAndDefaults) {
  const auto m = ConfigMap::parse("# comment\n\n method.alpha = 0.5 \nrun.seed=3\n");
  EXPECT_EQ(m.get("method.alpha"), "0.5");
  EXPECT_EQ(m.get("run.seed"), "3");
  EXPECT_EQ(m.get("env.kind"), "gridworld");
  EXPECT_FALSE(m.has("env.kind"));
  EXPECT_EQ(m.resolved().get("env.kind"), "gridworld");
  EXPECT_TRUE(m.resolved().has("env.kind"));
}

TEST(ConfigMap, ErrorsNameTheKey) {
  EXPECT_NE(error_of([] { ConfigMap::parse("method.variant = fancy\n"); }).find("method.variant"),
            std::string::npos);
  EXPECT_NE(error_of([] { ConfigMap::parse("env.gamma = abc\n"); }).find("env.gamma"),
            std::string::npos);
  EXPECT_NE(error_of([] { ConfigMap::parse("bogus.key = 1\n"); }).find("bogus.key"),
            std::string::npos);
  EXPECT_NE(error_of([] { ConfigMap::parse("a b c\n", "x.cfg"); }).find("x.cfg:1"),
            std::string::npos);
  EXPECT_NE(error_of([] { ConfigMap::parse("run.seed = 1\nrun.seed = 2\n"); }).find("duplicate"),
            std::string::npos);
  EXPECT_NE(error_of([] { ConfigMap::parse("data.horizon = -3\n"); }).find("data.horizon"),
            std::string::npos);
  EXPECT_NE(error_of([] { ConfigMap{}.resolved(); }).find("run.seed"), std::string::npos);
}

TEST(ConfigMap, RenderRoundTrip) {
  auto m = ConfigMap::parse("run.seed = 5\nenv.rewards = 1, 0.5\n");
  const std::string text = m.resolved().render();
  EXPECT_EQ(ConfigMap::parse(text).render(), text);
  EXPECT_NE(text.find("run.seed = 5\n"), std::string::npos);
}

TEST(ConfigTemplate, ParsesOnceSeedIsSet) {
  const std::string tmpl = config_template();
  for (const auto& f : config_schema()) EXPECT_NE(tmpl.find(f.key), std::string::npos) << f.key;
  auto m = ConfigMap::parse(tmpl);
  m.set("run.seed", "1");
  EXPECT_NO_THROW(resolve_config(m));
}

TEST(ResolveConfig, TypedValues) {
  auto m = ConfigMap::parse(
      "run.seed = 9\nenv.kind = bandit\nenv.rewards = 1,0.5,0\ndata.density = dense\n"
      "method.variant = vanilla\nmethod.lambda = 1\noptimizer.method = momentum\n"
      "data.score_gamma = 0.8\n");
  const auto c = resolve_config(m);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.env.kind, EnvKind::bandit);
  EXPECT_EQ(c.env.rewards, (std::vector<double>{1.0, 0.5, 0.0}));
  EXPECT_EQ(c.data.density, Density::dense);
  EXPECT_EQ(c.method.loss.variant, LossVariant::vanilla);
  EXPECT_EQ(c.optimizer.method, OptimizerMethod::momentum);
  EXPECT_EQ(c.data.score_gamma, std::optional<double>(0.8));
  EXPECT_EQ(c.source.render(), m.resolved().render());
}

TEST(ResolveConfig, CrossFieldChecks) {
  auto expect_key = [](const std::string& text, const std::string& key) {
    const auto m = ConfigMap::parse("run.seed = 1\n" + text);
    EXPECT_NE(error_of([&] { resolve_config(m); }).find(key), std::string::npos) << text;
  };
  expect_key("method.variant = ranking\n", "method.variant");
  expect_key("data.ranking_size = 3\n", "method.variant");
  expect_key("method.name = sft\ndata.label_mode = soft\n", "data.label_mode");
  expect_key("method.variant = bc_reg\n", "method.beta");
  expect_key("env.goal_x = 9\n", "env.goal_x");
  expect_key("env.kind = file\nenv.path = /does/not/exist\n", "env.path");
  expect_key("data.horizon = 2\ndata.segment_length = 4\n", "data.horizon");
  expect_key("method.lambda = 0\n", "method.lambda");
  expect_key("env.gamma = 1\n", "env.gamma");
}

TEST(ConfigMap, LoadFromFile) {
  const auto dir = testing::scratch_dir("config_load");
  const auto path = (dir / "a.cfg").string();
  std::ofstream(path) << "run.seed = 4\n";
  EXPECT_EQ(ConfigMap::load(path).get("run.seed"), "4");
  EXPECT_THROW(ConfigMap::load((dir / "missing.cfg").string()), IoError);
}

TEST(GitBlobHash, KnownValues) {
  EXPECT_EQ(git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_EQ(git_blob_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

}  // namespace
}  // namespace cpl
