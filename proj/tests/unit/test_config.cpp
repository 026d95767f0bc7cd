#include <algorithm>
#include <string>

#include <gtest/gtest.h>

#include "fedstale/config.hpp"
#include "fedstale/csv.hpp"
#include "fedstale/errors.hpp"
#include "fedstale/hard_instance.hpp"
#include "fedstale/quadratic.hpp"
#include "test_support.hpp"

namespace fedstale {
namespace {

constexpr const char* kMinimal = "objective = quadratic2d\nrule = fedstale\nbeta = 0.5\n";

ConfigError config_error(const std::string& text, const std::vector<std::string>& overrides = {}) {
  try {
    parse_config_text(text, overrides);
  } catch (const ConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "expected ConfigError for:\n" << text;
  return ConfigError("", 0, "");
}

TEST(Config, MinimalUsesDefaults) {
  const auto cfg = parse_config_text(kMinimal);
  EXPECT_EQ(cfg.objective, ObjectiveKind::kQuadratic);
  EXPECT_EQ(cfg.train.aggregator.rule, AggregationRule::kFedStale);
  EXPECT_EQ(cfg.train.aggregator.beta, 0.5);
  EXPECT_EQ(cfg.train.rounds, TrainConfig{}.rounds);
  EXPECT_EQ(cfg.key_lines.at("train.beta"), 3u);
  const auto obj = make_objective(cfg);
  EXPECT_EQ(obj->client_count(), 2u);
  EXPECT_EQ(obj->dimension(), 2u);
  const auto train = make_train_config(cfg, *obj);
  EXPECT_EQ(train.profile.client_count(), 2u);
}

TEST(Config, OutOfRangeBetaNamesKeyAndLine) {
  const auto e = config_error("objective = quadratic2d\nrule = fedstale\nbeta = 1.5\n");
  EXPECT_EQ(e.key(), "train.beta");
  EXPECT_EQ(e.line(), 3u);
  EXPECT_NE(std::string(e.what()).find("beta"), std::string::npos);
}

TEST(Config, OverrideSupersedesFile) {
  const auto cfg = parse_config_text(kMinimal, {"beta=0.8"});
  EXPECT_EQ(cfg.train.aggregator.beta, 0.8);
  EXPECT_EQ(cfg.key_lines.at("train.beta"), 0u);
  const std::string text = render_config(cfg);
  EXPECT_NE(text.find("beta = 0.8\n"), std::string::npos) << text;
  const auto q = parse_config_text(kMinimal, {"train.rounds=77"});
  EXPECT_EQ(q.train.rounds, 77u);
}

TEST(Config, Errors) {
  EXPECT_EQ(config_error("nonsense = 1\n").line(), 1u);
  EXPECT_EQ(config_error("[train]\nrounds = many\n").key(), "train.rounds");
  EXPECT_EQ(config_error("[train]\nrounds = 3\nrounds = 4\n").line(), 3u);
  EXPECT_EQ(config_error("[bogus]\nx = 1\n").line(), 1u);
  EXPECT_EQ(config_error("just words\n").line(), 1u);
  // "seeds" exists in several sections.
  EXPECT_NE(std::string(config_error("seeds = 1\n").what()).find("ambiguous"), std::string::npos);
  config_error(kMinimal, {"beta"});
  config_error(kMinimal, {"train.client_lr=-1"});
  config_error("[train]\nrule = scaffold\n");
  config_error("[participation]\nprobs = 1, 0\n");
  config_error("[softmax]\nclasses = 3\nclass_pair = 0,3\n");
  config_error("[experiment]\nobjective = hard_instance\n[hard]\ndimension = 10\nhorizon = 5\n");
}

TEST(Config, CommentsSectionsAndQualifiedKeys) {
  const auto cfg = parse_config_text(
      "# comment\n[train]\nrounds = 12  # trailing\n[participation]\nprobs = 1, 0.5\n"
      "train.server_lr = 0.25\n");
  EXPECT_EQ(cfg.train.rounds, 12u);
  EXPECT_EQ(cfg.participation.probs, (std::vector<double>{1.0, 0.5}));
  EXPECT_EQ(cfg.train.server_lr, 0.25);
}

TEST(Config, JsonMatchesText) {
  const auto a = parse_config_text(
      "[experiment]\nobjective = softmax\n[softmax]\nclients = 6\n[train]\nclient_lr = 0.125\n"
      "rule = u_fedvarp\n[grid]\nratios = 1, 3\n");
  const auto b = parse_config_text(
      R"({"experiment": {"objective": "softmax"}, "softmax": {"clients": 6},
          "train": {"client_lr": 0.125, "rule": "u_fedvarp"}, "grid": {"ratios": [1, 3]}})");
  EXPECT_EQ(render_config(a), render_config(b));
  EXPECT_THROW(parse_config_text("{not json"), ConfigError);
}

TEST(Config, RenderRoundTrips) {
  const auto cfg = parse_config_text(
      "[experiment]\nobjective = softmax\nseeds = 0,1,2\n[train]\nclient_lr = 0.1\n"
      "init_point = \nbeta = 0.3333333333333333\n[participation]\nmode = two_group\n");
  const std::string once = render_config(cfg);
  const std::string twice = render_config(parse_config_text(once));
  EXPECT_EQ(once, twice);
  EXPECT_EQ(parse_config_text(once).train.aggregator.beta, 0.3333333333333333);
}

TEST(Config, EveryKeyIsRendered) {
  const std::string text = render_config(parse_config_text(""));
  for (const auto& key : config_keys()) {
    const auto dot = key.find('.');
    const std::string section = "[" + key.substr(0, dot) + "]";
    const std::string name = key.substr(dot + 1) + " =";
    const auto at = text.find(section);
    ASSERT_NE(at, std::string::npos) << key;
    EXPECT_NE(text.find(name, at), std::string::npos) << key;
  }
}

TEST(Config, ObjectiveFactories) {
  auto cfg = parse_config_text("[experiment]\nobjective = hard_instance\n[hard]\ndimension = 21\n"
                               "horizon = 10\nclients = 3\n[lowerbound]\nrounds = 10\n");
  const auto hard = make_objective(cfg);
  EXPECT_EQ(hard->kind(), "hard_instance");
  EXPECT_EQ(hard->client_count(), 3u);

  cfg = parse_config_text("[experiment]\nobjective = quadratic\n[quadratic]\npreset = custom\n"
                          "centers = 1,0; -1,0\nhessians = 1,0,0,1; 2,0,0,2\n");
  const auto q = make_objective(cfg);
  EXPECT_EQ(q->client_count(), 2u);
  EXPECT_DOUBLE_EQ(*q->exact_smoothness(), 2.0);

  cfg = parse_config_text("[experiment]\nobjective = softmax\n[softmax]\nclients = 6\n"
                          "[participation]\nmode = two_group\np_min = 0.2\ngroup2_size = 2\n");
  const auto sm = make_objective(cfg);
  const auto prof = make_profile(cfg, sm->client_count());
  int rare = 0;
  for (std::size_t i = 0; i < 6; ++i) rare += prof.prob(i) < 1.0;
  EXPECT_EQ(rare, 2);
}

TEST(Config, ParseFileReportsMissingFile) {
  testing::TempDir dir;
  EXPECT_THROW(parse_config(dir / "absent.cfg"), IoError);
  write_text_atomic(dir / "ok.cfg", kMinimal);
  EXPECT_EQ(parse_config(dir / "ok.cfg").train.aggregator.beta, 0.5);
}

}  // namespace
}  // namespace fedstale
